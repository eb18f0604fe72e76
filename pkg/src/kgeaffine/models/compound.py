"""Compound affine relation operators applied block-diagonally.

A relation stores, per 2D or 3D subspace block, the parameters of an
ordered cascade of elementary operators (translation, scaling, rotation,
reflection, shear). The head variant scores -||M_r h - t||, the tail
variant -||h - M_hat_r t||, and the complete variant -||M_r h -
M_hat_r t|| with two independent operator sets.

Reflection normals are stored raw and normalized when operators are
built, so gradients flow through the normalization. The default 2D
cascade (T, S, R) uses a closed-form elementwise path; every other
configuration goes through the homogeneous-matrix product, with
parameter derivatives obtained by the product rule over the cascade.
"""

import numpy as np

from ..geometry import OP_PARAM_COUNTS, CompoundParams, compound_matrices
from .base import compound_param_width, p_norm, p_norm_grad, register

_FAST_2D_OPS = ("T", "S", "R")


def _split_sets(spec, rel):
    per_set = spec.n_blocks * compound_param_width(spec)
    if spec.compound_variant == "complete":
        return [rel[:, :per_set], rel[:, per_set:]]
    return [rel]


def _unpack(spec, rel_set):
    """Per-kind views (m, n_blocks, c) of one operator set."""
    nb, pc = spec.n_blocks, compound_param_width(spec)
    per = rel_set.reshape(-1, nb, pc)
    counts = OP_PARAM_COUNTS[spec.block_dim]
    arrays, off = {}, 0
    for kind in spec.compound_ops:
        arrays[kind] = per[..., off: off + counts[kind]]
        off += counts[kind]
    return arrays


def _normalized(arrays):
    """Unit-normal copy of the parameter dict plus the raw norms."""
    if "F" not in arrays:
        return arrays, None
    raw = arrays["F"]
    norm = np.sqrt((raw * raw).sum(axis=-1, keepdims=True))
    out = dict(arrays)
    out["F"] = raw / norm
    return out, norm


def params_from_row(spec, row, set_index=0):
    """CompoundParams view of one relation row (normals normalized)."""
    row = np.asarray(row, dtype=np.float64)
    rel_set = _split_sets(spec, row[None, :])[set_index]
    arrays, _ = _normalized(_unpack(spec, rel_set))
    kw = {CompoundParams._BY_KIND[k]: arrays[k][0] for k in spec.compound_ops}
    return CompoundParams(
        block_dim=spec.block_dim, ops=spec.compound_ops, shear_form=spec.shear_form, **kw
    )


def _forward_fast(arrays, x):
    v, s, th = arrays["T"], arrays["S"], arrays["R"]
    c, sn = np.cos(th[..., 0]), np.sin(th[..., 0])
    ux = x[..., 0] * c - x[..., 1] * sn
    uy = x[..., 0] * sn + x[..., 1] * c
    z = np.empty_like(x)
    z[..., 0] = s[..., 0] * ux + v[..., 0]
    z[..., 1] = s[..., 1] * uy + v[..., 1]
    return z, (c, sn, ux, uy)


def _entity_grad_fast(arrays, cache, q):
    c, sn, _, _ = cache
    s = arrays["S"]
    gx = np.empty_like(q)
    gx[..., 0] = q[..., 0] * s[..., 0] * c + q[..., 1] * s[..., 1] * sn
    gx[..., 1] = -q[..., 0] * s[..., 0] * sn + q[..., 1] * s[..., 1] * c
    return gx


def _rel_grads_fast(arrays, cache, q):
    c, sn, ux, uy = cache
    s = arrays["S"]
    qx, qy = q[..., 0], q[..., 1]
    parts = {
        "T": np.stack([qx, qy], axis=-1),
        "S": np.stack([qx * ux, qy * uy], axis=-1),
        "R": (qy * s[..., 1] * ux - qx * s[..., 0] * uy)[..., None],
    }
    return np.concatenate([parts[k] for k in _FAST_2D_OPS], axis=-1)


def _forward_generic(spec, arrays_hat, x, want_grads):
    bd = spec.block_dim
    out = compound_matrices(
        spec.compound_ops, arrays_hat, bd, shear_form=spec.shear_form, want_grads=want_grads
    )
    m = out[0] if want_grads else out
    a = m[..., :bd, :bd]
    z = np.einsum("mbij,mbj->mbi", a, x) + m[..., :bd, bd]
    return (z, (a, out[1] if want_grads else None))


def _rel_grads_generic(spec, arrays, arrays_hat, norm_f, dms, x, q):
    bd = spec.block_dim
    counts = OP_PARAM_COUNTS[spec.block_dim]
    lead = q.shape[:2]
    per_kind = {k: np.zeros(lead + (counts[k],), dtype=np.float64) for k in spec.compound_ops}
    for kind, j, dm in dms:
        if dm.ndim == 2:
            dm = np.broadcast_to(dm, lead + dm.shape)
        dz = np.einsum("mbij,mbj->mbi", dm[..., :bd, :bd], x) + dm[..., :bd, bd]
        per_kind[kind][..., j] = (q * dz).sum(axis=-1)
    if "F" in per_kind:
        unit = arrays_hat["F"]
        g = per_kind["F"]
        per_kind["F"] = (g - (g * unit).sum(axis=-1, keepdims=True) * unit) / norm_f
    return np.concatenate([per_kind[k] for k in spec.compound_ops], axis=-1)


class _SetTransform:
    """Forward pass of one operator set over block coordinates."""

    def __init__(self, spec, rel_set, x, want_grads):
        self.spec = spec
        self.x = x
        self.arrays = _unpack(spec, rel_set)
        self.fast = spec.block_dim == 2 and spec.compound_ops == _FAST_2D_OPS
        if self.fast:
            self.z, self._cache = _forward_fast(self.arrays, x)
            self.arrays_hat = self.arrays
            self.norm_f = None
            self._dms = None
        else:
            self.arrays_hat, self.norm_f = _normalized(self.arrays)
            self.z, (self._a, self._dms) = _forward_generic(spec, self.arrays_hat, x, want_grads)

    def entity_grad(self, q):
        """A^T q per block: gradient through the transformed coordinates."""
        if self.fast:
            return _entity_grad_fast(self.arrays, self._cache, q)
        return np.einsum("mbij,mbi->mbj", self._a, q)

    def rel_grads(self, q):
        if self.fast:
            return _rel_grads_fast(self.arrays, self._cache, q)
        return _rel_grads_generic(
            self.spec, self.arrays, self.arrays_hat, self.norm_f, self._dms, self.x, q
        )


def _blocks(spec, flat):
    return flat.reshape(len(flat), spec.n_blocks, spec.block_dim)


def _compound_residual(spec, table, H, R, T, want_grads):
    rel = table.relations[R]
    sets = _split_sets(spec, rel)
    h, t = table.entities[H], table.entities[T]
    variant = spec.compound_variant
    th = tt = None
    if variant in ("head", "complete"):
        th = _SetTransform(spec, sets[0], _blocks(spec, h), want_grads)
    if variant in ("tail", "complete"):
        tt = _SetTransform(spec, sets[-1], _blocks(spec, t), want_grads)
    if variant == "head":
        res = th.z.reshape(len(h), -1) - t
    elif variant == "tail":
        res = h - tt.z.reshape(len(h), -1)
    else:
        res = th.z.reshape(len(h), -1) - tt.z.reshape(len(h), -1)
    return th, tt, res


def _compound_score(spec, table, H, R, T):
    _, _, res = _compound_residual(spec, table, H, R, T, want_grads=False)
    return -p_norm(res, spec.p_norm)


def _compound_grad(spec, table, H, R, T, upstream):
    th, tt, res = _compound_residual(spec, table, H, R, T, want_grads=True)
    m = len(res)
    q_flat = -upstream[:, None] * p_norm_grad(res, spec.p_norm)
    q = _blocks(spec, q_flat)
    dtype = table.dtype

    if spec.compound_variant == "head":
        grad_h = th.entity_grad(q).reshape(m, -1)
        grad_t = -q_flat
        grad_rel = th.rel_grads(q).reshape(m, -1)
    elif spec.compound_variant == "tail":
        grad_h = q_flat
        grad_t = -tt.entity_grad(q).reshape(m, -1)
        grad_rel = tt.rel_grads(-q).reshape(m, -1)
    else:
        grad_h = th.entity_grad(q).reshape(m, -1)
        grad_t = -tt.entity_grad(q).reshape(m, -1)
        grad_rel = np.concatenate(
            [th.rel_grads(q).reshape(m, -1), tt.rel_grads(-q).reshape(m, -1)], axis=1
        )
    return [
        ("entities", H, grad_h.astype(dtype, copy=False)),
        ("relations", R, grad_rel.astype(dtype, copy=False)),
        ("entities", T, grad_t.astype(dtype, copy=False)),
    ]


register("CompoundE", _compound_score, _compound_grad)
register("CompoundE3D", _compound_score, _compound_grad)
