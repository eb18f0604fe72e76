"""Translation/rotation/scaling distance families.

All scores are canonical (negated distance); gradients are exact
analytic derivatives of each scoring formula, with subgradients at norm
kinks set to 0.
"""

import numpy as np

from .base import (
    HAKE_MOD_EPS,
    interleave,
    interleaved_parts,
    p_norm,
    p_norm_grad,
    register,
)


def _transe_score(spec, table, H, R, T):
    res = table.entities[H] + table.relations[R] - table.entities[T]
    return -p_norm(res, spec.p_norm)


def _transe_grad(spec, table, H, R, T, upstream):
    res = table.entities[H] + table.relations[R] - table.entities[T]
    g = -upstream[:, None] * p_norm_grad(res, spec.p_norm)
    return [("entities", H, g), ("relations", R, g), ("entities", T, -g)]


def _transh_parts(spec, table, H, R, T):
    d = spec.entity_dim
    rel = table.relations[R]
    w_raw, r = rel[:, :d], rel[:, d:]
    wn = np.sqrt((w_raw * w_raw).sum(axis=1, keepdims=True))
    w = w_raw / wn  # hyperplane normal, normalized at score time
    u = table.entities[H] - table.entities[T]
    res = u - (u * w).sum(axis=1, keepdims=True) * w + r
    return w_raw, w, wn, u, res


def _transh_score(spec, table, H, R, T):
    _, _, _, _, res = _transh_parts(spec, table, H, R, T)
    return -(res * res).sum(axis=1)


def _transh_grad(spec, table, H, R, T, upstream):
    w_raw, w, wn, u, res = _transh_parts(spec, table, H, R, T)
    q = -2.0 * upstream[:, None] * res
    qw = (q * w).sum(axis=1, keepdims=True)
    grad_h = q - qw * w
    uw = (u * w).sum(axis=1, keepdims=True)
    grad_w_hat = -(qw * u + uw * q)
    grad_w = (grad_w_hat - (grad_w_hat * w).sum(axis=1, keepdims=True) * w) / wn
    grad_rel = np.concatenate([grad_w, q], axis=1)
    return [("entities", H, grad_h), ("relations", R, grad_rel), ("entities", T, -grad_h)]


def _transr_parts(spec, table, H, R, T):
    d, k = spec.entity_dim, spec.relation_dim
    rel = table.relations[R]
    mat = rel[:, : k * d].reshape(-1, k, d)
    r = rel[:, k * d:]
    u = table.entities[H] - table.entities[T]
    res = np.einsum("mkd,md->mk", mat, u) + r
    return mat, u, res


def _transr_score(spec, table, H, R, T):
    _, _, res = _transr_parts(spec, table, H, R, T)
    return -(res * res).sum(axis=1)


def _transr_grad(spec, table, H, R, T, upstream):
    mat, u, res = _transr_parts(spec, table, H, R, T)
    q = -2.0 * upstream[:, None] * res
    grad_h = np.einsum("mkd,mk->md", mat, q)
    grad_mat = np.einsum("mk,md->mkd", q, u).reshape(len(q), -1)
    grad_rel = np.concatenate([grad_mat, q], axis=1)
    return [("entities", H, grad_h), ("relations", R, grad_rel), ("entities", T, -grad_h)]


def _pad_to(arr, width):
    """Keep the first min(k, d) coordinates, zero-fill the rest."""
    m, w = arr.shape
    if w == width:
        return arr.copy()
    out = np.zeros((m, width), dtype=arr.dtype)
    out[:, : min(w, width)] = arr[:, : min(w, width)]
    return out


def _transd_parts(spec, table, H, R, T):
    d, k = spec.entity_dim, spec.relation_dim
    eh = table.entities[H]
    et = table.entities[T]
    h, hp = eh[:, :d], eh[:, d:]
    t, tp = et[:, :d], et[:, d:]
    rel = table.relations[R]
    r, rp = rel[:, :k], rel[:, k:]
    ch = (hp * h).sum(axis=1, keepdims=True)
    ct = (tp * t).sum(axis=1, keepdims=True)
    res = rp * ch + _pad_to(h, k) - (rp * ct + _pad_to(t, k)) + r
    return h, hp, t, tp, r, rp, ch, ct, res


def _transd_score(spec, table, H, R, T):
    res = _transd_parts(spec, table, H, R, T)[-1]
    return -(res * res).sum(axis=1)


def _transd_grad(spec, table, H, R, T, upstream):
    d, k = spec.entity_dim, spec.relation_dim
    h, hp, t, tp, r, rp, ch, ct, res = _transd_parts(spec, table, H, R, T)
    q = -2.0 * upstream[:, None] * res
    qrp = (q * rp).sum(axis=1, keepdims=True)
    grad_h = qrp * hp + _pad_to(q, d)
    grad_hp = qrp * h
    grad_t = -(qrp * tp + _pad_to(q, d))
    grad_tp = -qrp * t
    grad_rp = (ch - ct) * q
    return [
        ("entities", H, np.concatenate([grad_h, grad_hp], axis=1)),
        ("relations", R, np.concatenate([q, grad_rp], axis=1)),
        ("entities", T, np.concatenate([grad_t, grad_tp], axis=1)),
    ]


def _transm_score(spec, table, H, R, T):
    rel = table.relations[R]
    r, w = rel[:, :-1], rel[:, -1]
    res = table.entities[H] + r - table.entities[T]
    return -w * p_norm(res, spec.p_norm)


def _transm_grad(spec, table, H, R, T, upstream):
    rel = table.relations[R]
    r, w = rel[:, :-1], rel[:, -1]
    res = table.entities[H] + r - table.entities[T]
    n = p_norm(res, spec.p_norm)
    g = -(upstream * w)[:, None] * p_norm_grad(res, spec.p_norm)
    grad_w = (-upstream * n)[:, None]
    grad_rel = np.concatenate([g, grad_w], axis=1)
    return [("entities", H, g), ("relations", R, grad_rel), ("entities", T, -g)]


def _transf_score(spec, table, H, R, T):
    h, t = table.entities[H], table.entities[T]
    r = table.relations[R]
    return ((h + r) * t).sum(axis=1) + ((t - r) * h).sum(axis=1)


def _transf_grad(spec, table, H, R, T, upstream):
    h, t = table.entities[H], table.entities[T]
    r = table.relations[R]
    u = upstream[:, None]
    return [
        ("entities", H, u * (2.0 * t - r)),
        ("relations", R, u * (t - h)),
        ("entities", T, u * (2.0 * h + r)),
    ]


def _rotate_parts(spec, table, H, R, T):
    hr, hi = interleaved_parts(table.entities[H])
    tr, ti = interleaved_parts(table.entities[T])
    theta = table.relations[R]
    c, s = np.cos(theta), np.sin(theta)
    rot_r = hr * c - hi * s
    rot_i = hr * s + hi * c
    return c, s, rot_r, rot_i, rot_r - tr, rot_i - ti


def _complex_residual_grad(er, ei, p):
    """d(dist)/d(residual) for a complex residual under L1-of-modulus or
    L2-over-all-components."""
    if p == 1:
        mod = np.sqrt(er * er + ei * ei)
        ger = np.divide(er, mod, out=np.zeros_like(er), where=mod > 0)
        gei = np.divide(ei, mod, out=np.zeros_like(ei), where=mod > 0)
        return ger, gei
    n = np.sqrt((er * er + ei * ei).sum(axis=1, keepdims=True))
    ger = np.divide(er, n, out=np.zeros_like(er), where=n > 0)
    gei = np.divide(ei, n, out=np.zeros_like(ei), where=n > 0)
    return ger, gei


def _rotate_score(spec, table, H, R, T):
    _, _, _, _, er, ei = _rotate_parts(spec, table, H, R, T)
    if spec.p_norm == 1:
        return -np.sqrt(er * er + ei * ei).sum(axis=1)
    return -np.sqrt((er * er + ei * ei).sum(axis=1))


def _rotate_grad(spec, table, H, R, T, upstream):
    c, s, rot_r, rot_i, er, ei = _rotate_parts(spec, table, H, R, T)
    ger, gei = _complex_residual_grad(er, ei, spec.p_norm)
    qr = -upstream[:, None] * ger
    qi = -upstream[:, None] * gei
    grad_hr = qr * c + qi * s
    grad_hi = -qr * s + qi * c
    grad_theta = qr * (-rot_i) + qi * rot_r
    return [
        ("entities", H, interleave(grad_hr, grad_hi)),
        ("relations", R, grad_theta),
        ("entities", T, interleave(-qr, -qi)),
    ]


def _pairre_parts(spec, table, H, R, T):
    d = spec.entity_dim
    rel = table.relations[R]
    rh, rt = rel[:, :d], rel[:, d:]
    h, t = table.entities[H], table.entities[T]
    return h, t, rh, rt, h * rh - t * rt


def _pairre_score(spec, table, H, R, T):
    res = _pairre_parts(spec, table, H, R, T)[-1]
    return -p_norm(res, spec.p_norm)


def _pairre_grad(spec, table, H, R, T, upstream):
    h, t, rh, rt, res = _pairre_parts(spec, table, H, R, T)
    q = -upstream[:, None] * p_norm_grad(res, spec.p_norm)
    grad_rel = np.concatenate([q * h, -q * t], axis=1)
    return [("entities", H, q * rh), ("relations", R, grad_rel), ("entities", T, -q * rt)]


def _hake_parts(spec, table, H, R, T):
    d = spec.entity_dim
    eh, et = table.entities[H], table.entities[T]
    hp, hm = eh[:, :d], eh[:, d:]
    tp, tm = et[:, :d], et[:, d:]
    rel = table.relations[R]
    rp, rm, rmp_raw = rel[:, :d], rel[:, d: 2 * d], rel[:, 2 * d:]
    rmp = np.clip(rmp_raw, -1.0 + HAKE_MOD_EPS, 1.0 - HAKE_MOD_EPS)
    phi = (hp + rp - tp) / 2.0
    ratio = (rm + rmp) / (1.0 - rmp)
    v = hm * ratio - tm
    return hp, hm, tp, tm, rp, rm, rmp_raw, rmp, phi, ratio, v


def _hake_score(spec, table, H, R, T):
    _, _, _, _, _, _, _, _, phi, _, v = _hake_parts(spec, table, H, R, T)
    d_phase = np.abs(np.sin(phi)).sum(axis=1)
    d_mod = np.sqrt((v * v).sum(axis=1))
    return -(d_mod + spec.hake_lambda * d_phase)


def _hake_grad(spec, table, H, R, T, upstream):
    hp, hm, tp, tm, rp, rm, rmp_raw, rmp, phi, ratio, v = _hake_parts(spec, table, H, R, T)
    sphi = np.sin(phi)
    n2 = np.sqrt((v * v).sum(axis=1, keepdims=True))
    gphi = -(spec.hake_lambda * upstream)[:, None] * np.sign(sphi) * np.cos(phi)
    gv = -upstream[:, None] * np.divide(v, n2, out=np.zeros_like(v), where=n2 > 0)
    inv = 1.0 / (1.0 - rmp)
    gate = (rmp_raw > -1.0 + HAKE_MOD_EPS) & (rmp_raw < 1.0 - HAKE_MOD_EPS)
    grad_hp = 0.5 * gphi
    grad_hm = gv * ratio
    grad_tp = -0.5 * gphi
    grad_tm = -gv
    grad_rp = 0.5 * gphi
    grad_rm = gv * hm * inv
    grad_rmp = gv * hm * (1.0 + rm) * inv * inv * gate
    return [
        ("entities", H, np.concatenate([grad_hp, grad_hm], axis=1)),
        ("relations", R, np.concatenate([grad_rp, grad_rm, grad_rmp], axis=1)),
        ("entities", T, np.concatenate([grad_tp, grad_tm], axis=1)),
    ]


register("TransE", _transe_score, _transe_grad)
register("TransH", _transh_score, _transh_grad)
register("TransR", _transr_score, _transr_grad)
register("TransD", _transd_score, _transd_grad)
register("TransM", _transm_score, _transm_grad)
register("TransF", _transf_score, _transf_grad)
register("RotatE", _rotate_score, _rotate_grad)
register("PairRE", _pairre_score, _pairre_grad)
register("HAKE", _hake_score, _hake_grad)
