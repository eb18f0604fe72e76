"""Pure-numpy implementations of the hot kernels.

Semantics must match ``_ckernels`` exactly: the compiled module is a
drop-in speedup, selected at import in ``kernels/__init__``.
"""

import numpy as np


def scatter_add_rows(dest, rows, vals):
    """In-place ``dest[rows[i]] += vals[i]``, repeated rows accumulated."""
    np.add.at(dest, rows, vals)


def sgd_update(params, rows, grads, lr):
    """``params[rows] -= lr * grads``; rows must be unique."""
    params[rows] -= (lr * grads).astype(params.dtype, copy=False)


def adagrad_update(params, accum, rows, grads, lr, eps):
    """Adagrad step on the given (unique) rows.

    accum[r] += g**2; params[r] -= lr * g / sqrt(accum[r] + eps)
    """
    g = grads.astype(params.dtype, copy=False)
    acc = accum[rows] + g * g
    accum[rows] = acc
    params[rows] -= lr * g / np.sqrt(acc + eps)


def rank_counts(scores, target_score, mask):
    """Count candidates strictly above / exactly at ``target_score``.

    Only positions where ``mask`` is nonzero participate. The target
    itself is normally inside the mask, so the tie count includes it.
    """
    m = mask.astype(bool, copy=False)
    sel = scores[m]
    greater = int((sel > target_score).sum())
    ties = int((sel == target_score).sum())
    return greater, ties
