"""Negative sampling and training losses.

Losses consume canonical scores (higher is better). The pairwise,
limit, double-limit, and self-adversarial losses are distance-based and
convert internally via ``d = -score``; the likelihood losses act on the
score directly. Every loss returns its value together with exact
gradient coefficients on each input score.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, SamplingError

LOSS_KINDS = ("margin", "limit", "double_limit", "self_adversarial", "nll", "bce")

NEGATIVE_MODES = ("uniform", "filtered")

_MAX_REDRAWS = 100


@dataclass
class LossParams:
    """Shared knob set for all loss kinds; each kind reads what it needs."""

    margin: float = 1.0                 # gamma of the pairwise and adversarial losses
    limit_mu: float = 1.0               # positive-score limit
    limit_lambda: float = 1.0           # weight of the limit term
    mu_pos: float = 0.5                 # double-limit positive bound
    mu_neg: float = 3.0                 # double-limit negative bound
    adversarial_temperature: float = 1.0
    nll_form: str = "softplus"          # softplus | literal

    def validate(self, kind):
        problems = []
        if kind in ("margin", "limit", "self_adversarial") and not self.margin > 0:
            problems.append(f"margin must be > 0, got {self.margin}")
        if kind == "limit" and self.limit_lambda < 0:
            problems.append(f"limit_lambda must be >= 0, got {self.limit_lambda}")
        if kind == "double_limit" and not (self.mu_neg > self.mu_pos > 0):
            problems.append(f"need mu_neg > mu_pos > 0, got mu_pos={self.mu_pos}, mu_neg={self.mu_neg}")
        if kind == "self_adversarial" and self.adversarial_temperature < 0:
            problems.append("adversarial_temperature must be >= 0")
        if kind == "nll" and self.nll_form not in ("softplus", "literal"):
            problems.append(f"nll_form must be softplus or literal, got {self.nll_form!r}")
        if problems:
            raise ParameterError("; ".join(problems))


@dataclass
class NegativeBatch:
    """k corruptions per positive triple, with leak bookkeeping."""

    triples: np.ndarray        # (m, k, 3) int64
    corrupted_side: np.ndarray  # (m, k) uint8, 0 = head replaced, 1 = tail replaced
    leaked: np.ndarray         # (m, k) bool, corruption is itself a known-true triple

    @property
    def k(self):
        return self.triples.shape[1]

    def flat(self):
        return self.triples.reshape(-1, 3)


def sample_negatives(store, triples, k, mode="uniform", rng=None):
    """Corrupt head or tail (probability 1/2 each) of every triple, k times.

    Uniform mode draws the replacement uniformly over all entities except
    the one being replaced. Filtered mode redraws (up to 100 attempts)
    whenever the corruption hits a known-true triple, then keeps the last
    draw with its leak flag set.
    """
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    if mode not in NEGATIVE_MODES:
        raise ParameterError(f"unknown sampling mode {mode!r}")
    rng = rng if rng is not None else np.random.default_rng()
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    n = store.vocab.n_entities
    if n < 2:
        raise SamplingError("cannot corrupt triples over a single-entity vocabulary")
    m = len(triples)
    h, r, t = triples[:, 0], triples[:, 1], triples[:, 2]

    side = rng.integers(0, 2, size=(m, k)).astype(np.uint8)
    original = np.where(side == 0, h[:, None], t[:, None])

    def draw(mask):
        d = rng.integers(0, n - 1, size=int(mask.sum()))
        orig = original[mask]
        return d + (d >= orig)  # uniform over ids != original

    entity = np.empty((m, k), dtype=np.int64)
    everywhere = np.ones((m, k), dtype=bool)
    entity[everywhere] = draw(everywhere)

    def leak_flags(mask):
        flags = np.zeros((m, k), dtype=bool)
        for i, j in zip(*np.nonzero(mask)):
            e = entity[i, j]
            if side[i, j] == 0:
                flags[i, j] = store.is_true(int(e), int(r[i]), int(t[i]))
            else:
                flags[i, j] = store.is_true(int(h[i]), int(r[i]), int(e))
        return flags

    leaked = leak_flags(everywhere)
    if mode == "filtered":
        for _ in range(_MAX_REDRAWS):
            if not leaked.any():
                break
            entity[leaked] = draw(leaked)
            leaked = np.where(leaked, leak_flags(leaked), leaked)

    out = np.empty((m, k, 3), dtype=np.int64)
    out[:, :, 1] = r[:, None]
    out[:, :, 0] = np.where(side == 0, entity, h[:, None])
    out[:, :, 2] = np.where(side == 1, entity, t[:, None])
    return NegativeBatch(out, side, leaked)


def _sigmoid(x):
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _softplus(x):
    return np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0.0)


def adversarial_weights(neg_scores, alpha):
    """Softmax over alpha * score per row, treated as constants downstream."""
    if alpha < 0:
        raise ParameterError(f"alpha must be >= 0, got {alpha}")
    neg_scores = np.asarray(neg_scores, dtype=np.float64)
    if neg_scores.size == 0:
        raise ParameterError("adversarial_weights needs at least one negative score")
    z = alpha * neg_scores
    z = z - z.max(axis=-1, keepdims=True)
    w = np.exp(z)
    return w / w.sum(axis=-1, keepdims=True)


def loss(kind, pos_scores, neg_scores, params=None):
    """Loss value and gradient coefficients on every input score.

    ``pos_scores`` has shape (m,), ``neg_scores`` (m, k). The value sums
    the per-positive terms of the named objective; the returned
    ``(grad_pos, grad_neg)`` are d(value)/d(score) with hinge
    subgradients at kinks set to 0.
    """
    if kind not in LOSS_KINDS:
        raise ParameterError(f"unknown loss kind {kind!r}")
    params = params if params is not None else LossParams()
    params.validate(kind)
    pos = np.asarray(pos_scores, dtype=np.float64).reshape(-1)
    neg = np.asarray(neg_scores, dtype=np.float64)
    if neg.ndim == 1:
        neg = neg.reshape(1, -1) if pos.size == 1 else neg.reshape(-1, 1)
    if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(neg))):
        raise ParameterError("scores must be finite")
    m, k = neg.shape
    if pos.shape != (m,):
        raise ParameterError(f"pos/neg shapes disagree: {pos.shape} vs {neg.shape}")

    if kind == "margin":
        dp, dn = -pos, -neg
        gap = params.margin + dp[:, None] - dn
        active = gap > 0
        value = float(np.where(active, gap, 0.0).sum())
        grad_pos = -active.sum(axis=1).astype(np.float64)
        grad_neg = active.astype(np.float64)
        return value, (grad_pos, grad_neg)

    if kind == "limit":
        dp, dn = -pos, -neg
        gap = params.margin + dp[:, None] - dn
        act1 = gap > 0
        over = dp - params.limit_mu
        act2 = over > 0
        value = float(np.where(act1, gap, 0.0).sum()
                      + params.limit_lambda * k * np.where(act2, over, 0.0).sum())
        grad_pos = -(act1.sum(axis=1) + params.limit_lambda * k * act2).astype(np.float64)
        grad_neg = act1.astype(np.float64)
        return value, (grad_pos, grad_neg)

    if kind == "double_limit":
        dp, dn = -pos, -neg
        over_p = dp - params.mu_pos
        act_p = over_p > 0
        under_n = params.mu_neg - dn
        act_n = under_n > 0
        value = float(k * np.where(act_p, over_p, 0.0).sum()
                      + params.limit_lambda * np.where(act_n, under_n, 0.0).sum())
        grad_pos = -(k * act_p).astype(np.float64)
        grad_neg = params.limit_lambda * act_n.astype(np.float64)
        return value, (grad_pos, grad_neg)

    if kind == "self_adversarial":
        gamma = params.margin
        dp, dn = -pos, -neg
        w = adversarial_weights(neg, params.adversarial_temperature)
        value = float(_softplus(dp - gamma).sum() + (w * _softplus(gamma - dn)).sum())
        grad_pos = -_sigmoid(dp - gamma)
        grad_neg = w * _sigmoid(gamma - dn)
        return value, (grad_pos, grad_neg)

    if kind == "nll":
        if params.nll_form == "softplus":
            value = float(_softplus(-pos).sum() + _softplus(neg).sum())
            grad_pos = -_sigmoid(-pos)
            grad_neg = _sigmoid(neg)
        else:  # the bounded-below literal form, kept for comparison
            value = float((1.0 + np.exp(-pos)).sum() + (1.0 + np.exp(neg)).sum())
            grad_pos = -np.exp(-pos)
            grad_neg = np.exp(neg)
        return value, (grad_pos, grad_neg)

    # bce: labels 1 for positives, 0 for negatives, p = sigmoid(score)
    n_total = pos.size + neg.size
    value = float((_softplus(-pos).sum() + _softplus(neg).sum()) / n_total)
    grad_pos = (_sigmoid(pos) - 1.0) / n_total
    grad_neg = _sigmoid(neg) / n_total
    return value, (grad_pos, grad_neg)
