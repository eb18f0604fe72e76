"""Bilinear, complex, quaternion, and tensor-factorization families.

Scores are raw products (already higher-is-better). DistMult multiplies
head and tail first so that swapping the two arguments is bitwise
neutral, which keeps its forced symmetry exact in floating point.
"""

from functools import lru_cache

import numpy as np

from .base import interleaved_parts, register


def _rescal_score(spec, table, H, R, T):
    d = spec.entity_dim
    mat = table.relations[R].reshape(-1, d, d)
    return np.einsum("md,mde,me->m", table.entities[H], mat, table.entities[T])


def _rescal_grad(spec, table, H, R, T, upstream):
    d = spec.entity_dim
    h, t = table.entities[H], table.entities[T]
    mat = table.relations[R].reshape(-1, d, d)
    u = upstream[:, None]
    grad_h = u * np.einsum("mde,me->md", mat, t)
    grad_t = u * np.einsum("md,mde->me", h, mat)
    grad_m = np.einsum("m,md,me->mde", upstream, h, t).reshape(len(h), -1)
    return [("entities", H, grad_h), ("relations", R, grad_m), ("entities", T, grad_t)]


def _distmult_score(spec, table, H, R, T):
    h, t = table.entities[H], table.entities[T]
    return ((h * t) * table.relations[R]).sum(axis=1)


def _distmult_grad(spec, table, H, R, T, upstream):
    h, t = table.entities[H], table.entities[T]
    r = table.relations[R]
    u = upstream[:, None]
    return [
        ("entities", H, u * (r * t)),
        ("relations", R, u * (h * t)),
        ("entities", T, u * (r * h)),
    ]


@lru_cache(maxsize=8)
def _circ_indices(d):
    i = np.arange(d)
    fwd = (i[None, :] + i[:, None]) % d   # fwd[k, i] = (i + k) % d
    bwd = (i[:, None] - i[None, :]) % d   # bwd[j, i] = (j - i) % d
    return fwd, bwd


def circular_correlation(h, t):
    """(h star t)_k = sum_i h_i t_{(i+k) mod d}, direct O(d^2)."""
    fwd, _ = _circ_indices(h.shape[-1])
    return np.einsum("mi,mki->mk", h, t[:, fwd])


def circular_correlation_fft(h, t):
    """FFT route to the same correlation; agrees within 1e-9."""
    d = h.shape[-1]
    return np.fft.irfft(np.conj(np.fft.rfft(h, axis=-1)) * np.fft.rfft(t, axis=-1), n=d, axis=-1)


def _hole_score(spec, table, H, R, T):
    corr = circular_correlation(table.entities[H], table.entities[T])
    return (table.relations[R] * corr).sum(axis=1)


def _hole_grad(spec, table, H, R, T, upstream):
    h, t = table.entities[H], table.entities[T]
    r = table.relations[R]
    fwd, bwd = _circ_indices(spec.entity_dim)
    u = upstream[:, None]
    grad_r = u * circular_correlation(h, t)
    grad_h = u * np.einsum("mk,mki->mi", r, t[:, fwd])
    grad_t = u * np.einsum("mi,mji->mj", h, r[:, bwd])
    return [("entities", H, grad_h), ("relations", R, grad_r), ("entities", T, grad_t)]


def _complex_score(spec, table, H, R, T):
    hr, hi = interleaved_parts(table.entities[H])
    tr, ti = interleaved_parts(table.entities[T])
    rr, ri = interleaved_parts(table.relations[R])
    return (rr * (hr * tr + hi * ti) + ri * (hr * ti - hi * tr)).sum(axis=1)


def _complex_grad(spec, table, H, R, T, upstream):
    from .base import interleave

    hr, hi = interleaved_parts(table.entities[H])
    tr, ti = interleaved_parts(table.entities[T])
    rr, ri = interleaved_parts(table.relations[R])
    u = upstream[:, None]
    grad_h = interleave(u * (rr * tr + ri * ti), u * (rr * ti - ri * tr))
    grad_r = interleave(u * (hr * tr + hi * ti), u * (hr * ti - hi * tr))
    grad_t = interleave(u * (rr * hr - ri * hi), u * (rr * hi + ri * hr))
    return [("entities", H, grad_h), ("relations", R, grad_r), ("entities", T, grad_t)]


def _simple_score(spec, table, H, R, T):
    d = spec.entity_dim
    h, t = table.entities[H], table.entities[T]
    rel = table.relations[R]
    r, r_inv = rel[:, :d], rel[:, d:]
    return 0.5 * (((h * r) * t).sum(axis=1) + ((t * r_inv) * h).sum(axis=1))


def _simple_grad(spec, table, H, R, T, upstream):
    d = spec.entity_dim
    h, t = table.entities[H], table.entities[T]
    rel = table.relations[R]
    r, r_inv = rel[:, :d], rel[:, d:]
    u = 0.5 * upstream[:, None]
    ht = h * t
    grad_rel = np.concatenate([u * ht, u * ht], axis=1)
    return [
        ("entities", H, u * (r + r_inv) * t),
        ("relations", R, grad_rel),
        ("entities", T, u * (r + r_inv) * h),
    ]


def _tucker_score(spec, table, H, R, T):
    return np.einsum(
        "ijk,mi,mj,mk->m",
        table.core, table.entities[H], table.relations[R], table.entities[T],
    )


def _tucker_grad(spec, table, H, R, T, upstream):
    w = table.core
    h, t = table.entities[H], table.entities[T]
    r = table.relations[R]
    u = upstream[:, None]
    grad_h = u * np.einsum("ijk,mj,mk->mi", w, r, t)
    grad_r = u * np.einsum("ijk,mi,mk->mj", w, h, t)
    grad_t = u * np.einsum("ijk,mi,mj->mk", w, h, r)
    grad_core = np.einsum("m,mi,mj,mk->ijk", upstream, h, r, t).reshape(1, -1)
    return [
        ("entities", H, grad_h),
        ("relations", R, grad_r),
        ("entities", T, grad_t),
        ("core", np.zeros(1, dtype=np.int64), grad_core),
    ]


def _quat_parts(arr):
    dq = arr.shape[-1] // 4
    return arr[..., :dq], arr[..., dq: 2 * dq], arr[..., 2 * dq: 3 * dq], arr[..., 3 * dq:]


def _quate_forward(spec, table, H, R, T):
    ah, bh, ch, dh = _quat_parts(table.entities[H])
    rel = table.relations[R]
    ar, br, cr, dr = _quat_parts(rel)
    n = np.sqrt(ar * ar + br * br + cr * cr + dr * dr)
    p, q, u, v = ar / n, br / n, cr / n, dr / n  # unit relation quaternion
    ha = ah * p - bh * q - ch * u - dh * v
    hb = ah * q + bh * p + ch * v - dh * u
    hc = ah * u - bh * v + ch * p + dh * q
    hd = ah * v + bh * u - ch * q + dh * p
    return (ah, bh, ch, dh), (p, q, u, v), n, (ha, hb, hc, hd)


def _quate_score(spec, table, H, R, T):
    _, _, _, (ha, hb, hc, hd) = _quate_forward(spec, table, H, R, T)
    at, bt, ct, dt = _quat_parts(table.entities[T])
    return (ha * at + hb * bt + hc * ct + hd * dt).sum(axis=1)


def _quate_grad(spec, table, H, R, T, upstream):
    (ah, bh, ch, dh), (p, q, u, v), n, (ha, hb, hc, hd) = _quate_forward(spec, table, H, R, T)
    at, bt, ct, dt = _quat_parts(table.entities[T])
    w = upstream[:, None]

    grad_t = np.concatenate([w * ha, w * hb, w * hc, w * hd], axis=1)
    grad_h = np.concatenate(
        [
            w * (p * at + q * bt + u * ct + v * dt),
            w * (-q * at + p * bt - v * ct + u * dt),
            w * (-u * at + v * bt + p * ct - q * dt),
            w * (-v * at - u * bt + q * ct + p * dt),
        ],
        axis=1,
    )
    # gradient w.r.t. the unit quaternion, then back through normalization
    gp = w * (ah * at + bh * bt + ch * ct + dh * dt)
    gq = w * (-bh * at + ah * bt + dh * ct - ch * dt)
    gu = w * (-ch * at - dh * bt + ah * ct + bh * dt)
    gv = w * (-dh * at + ch * bt - bh * ct + ah * dt)
    dot = gp * p + gq * q + gu * u + gv * v
    grad_r = np.concatenate(
        [(gp - dot * p) / n, (gq - dot * q) / n, (gu - dot * u) / n, (gv - dot * v) / n],
        axis=1,
    )
    return [("entities", H, grad_h), ("relations", R, grad_r), ("entities", T, grad_t)]


register("RESCAL", _rescal_score, _rescal_grad)
register("DistMult", _distmult_score, _distmult_grad)
register("HolE", _hole_score, _hole_grad)
register("ComplEx", _complex_score, _complex_grad)
register("SimplE", _simple_score, _simple_grad)
register("TuckER", _tucker_score, _tucker_grad)
register("QuatE", _quate_score, _quate_grad)
