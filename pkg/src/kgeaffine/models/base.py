"""Model specs, embedding tables, and the score/gradient dispatch.

Every family implements two vectorized functions over id arrays:

    score_fn(spec, table, H, R, T) -> (m,) canonical scores
    grad_fn(spec, table, H, R, T, upstream) -> [(slot, rows, grads)]

Canonical scores are "higher is better": distance families return the
negated distance, product families the raw product. Gradient blocks are
per-occurrence (the trainer deduplicates rows); slots are "entities",
"relations", and "core" (TuckER's shared tensor).
"""

import math
from dataclasses import dataclass

import numpy as np

from ..errors import BoundsError, CorruptTableError, ParameterError
from ..geometry import OP_PARAM_COUNTS

FAMILIES = (
    "TransE", "TransH", "TransR", "TransD", "TransM", "TransF",
    "RotatE", "PairRE", "HAKE", "CompoundE", "CompoundE3D",
    "RESCAL", "DistMult", "HolE", "ComplEx", "SimplE", "TuckER", "QuatE",
)

DEFAULT_OPS_2D = ("T", "S", "R")
DEFAULT_OPS_3D = ("T", "S", "R", "F", "H")

HAKE_MOD_EPS = 1e-3  # clamp for the modulus-prime component


@dataclass(frozen=True)
class ModelSpec:
    """Family identifier plus the dimensions and knobs that shape a table."""

    family: str
    entity_dim: int
    relation_dim: int = None
    p_norm: int = 1
    compound_variant: str = "head"   # head | tail | complete
    compound_ops: tuple = None       # defaults per family
    shear_form: str = "product"
    hake_lambda: float = 0.5

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParameterError(f"unknown model family {self.family!r}")
        if self.relation_dim is None:
            object.__setattr__(self, "relation_dim", self.entity_dim)
        if self.entity_dim <= 0 or self.relation_dim <= 0:
            raise ParameterError("dimensions must be positive")
        if self.p_norm not in (1, 2):
            raise ParameterError("p_norm must be 1 or 2")
        d = self.entity_dim
        if self.family in ("RotatE", "ComplEx") and d % 2:
            raise ParameterError(f"{self.family} needs an even entity_dim (real/imag interleave)")
        if self.family == "QuatE" and d % 4:
            raise ParameterError("QuatE needs entity_dim divisible by 4")
        if self.family == "CompoundE" and d % 2:
            raise ParameterError("CompoundE needs entity_dim divisible by 2")
        if self.family == "CompoundE3D" and d % 3:
            raise ParameterError("CompoundE3D needs entity_dim divisible by 3")
        if self.compound_variant not in ("head", "tail", "complete"):
            raise ParameterError(f"unknown compound variant {self.compound_variant!r}")
        if self.family in ("CompoundE", "CompoundE3D"):
            bd = 2 if self.family == "CompoundE" else 3
            ops = self.compound_ops
            if ops is None:
                ops = DEFAULT_OPS_2D if bd == 2 else DEFAULT_OPS_3D
            ops = tuple(ops)
            for kind in ops:
                if kind not in OP_PARAM_COUNTS[bd]:
                    raise ParameterError(f"operator {kind!r} is not available in {bd}D")
            if not ops:
                raise ParameterError("compound families need at least one operator kind")
            object.__setattr__(self, "compound_ops", ops)
        if self.shear_form not in ("product", "displayed"):
            raise ParameterError(f"unknown shear_form {self.shear_form!r}")

    @property
    def block_dim(self):
        return {"CompoundE": 2, "CompoundE3D": 3}.get(self.family)

    @property
    def n_blocks(self):
        bd = self.block_dim
        return None if bd is None else self.entity_dim // bd

    def to_dict(self):
        return {
            "family": self.family,
            "entity_dim": self.entity_dim,
            "relation_dim": self.relation_dim,
            "p_norm": self.p_norm,
            "compound_variant": self.compound_variant,
            "compound_ops": list(self.compound_ops) if self.compound_ops else None,
            "shear_form": self.shear_form,
            "hake_lambda": self.hake_lambda,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if d.get("compound_ops"):
            d["compound_ops"] = tuple(d["compound_ops"])
        return cls(**d)


def compound_param_width(spec):
    """Parameters per block for one operator set of a compound family."""
    counts = OP_PARAM_COUNTS[spec.block_dim]
    return sum(counts[k] for k in spec.compound_ops)


def entity_width(spec):
    d = spec.entity_dim
    if spec.family == "TransD":
        return 2 * d  # [embedding | projection vector]
    if spec.family == "HAKE":
        return 2 * d  # [phases | moduli]
    return d


def relation_width(spec):
    d, k = spec.entity_dim, spec.relation_dim
    family = spec.family
    if family in ("TransE", "TransF", "DistMult", "HolE", "ComplEx", "QuatE"):
        return d
    if family == "TransH":
        return 2 * d          # [hyperplane normal | translation]
    if family == "TransR":
        return k * d + k      # [projection matrix, row-major | translation]
    if family == "TransD":
        return 2 * k          # [translation | relation projection vector]
    if family == "TransM":
        return d + 1          # [translation | weight]
    if family == "RotatE":
        return d // 2         # phases
    if family in ("PairRE", "SimplE"):
        return 2 * d
    if family == "HAKE":
        return 3 * d          # [phases | moduli | modulus-prime]
    if family == "TuckER":
        return k
    if family in ("CompoundE", "CompoundE3D"):
        per_set = spec.n_blocks * compound_param_width(spec)
        return per_set * (2 if spec.compound_variant == "complete" else 1)
    if family == "RESCAL":
        return d * d
    raise ParameterError(f"unknown model family {family!r}")


def core_shape(spec):
    if spec.family == "TuckER":
        return (spec.entity_dim, spec.relation_dim, spec.entity_dim)
    return None


@dataclass
class EmbeddingTable:
    """Dense parameter arrays for one model over one vocabulary."""

    spec: ModelSpec
    entities: np.ndarray
    relations: np.ndarray
    core: np.ndarray = None

    @property
    def dtype(self):
        return self.entities.dtype

    @property
    def n_entities(self):
        return self.entities.shape[0]

    @property
    def n_relations(self):
        return self.relations.shape[0]

    def slots(self):
        out = {"entities": self.entities, "relations": self.relations}
        if self.core is not None:
            out["core"] = self.core
        return out

    def copy(self):
        return EmbeddingTable(
            self.spec,
            self.entities.copy(),
            self.relations.copy(),
            None if self.core is None else self.core.copy(),
        )

    def astype(self, dtype):
        return EmbeddingTable(
            self.spec,
            self.entities.astype(dtype),
            self.relations.astype(dtype),
            None if self.core is None else self.core.astype(dtype),
        )

    def validate(self):
        for name, arr in self.slots().items():
            if not np.all(np.isfinite(arr)):
                raise CorruptTableError(f"non-finite values in {name}")
        if self.entities.shape[1] != entity_width(self.spec):
            raise ParameterError("entity array width does not match the spec")
        if self.relations.shape[1] != relation_width(self.spec):
            raise ParameterError("relation array width does not match the spec")


def _uniform_angles(rng, shape):
    """Deterministic draw of angles in (-pi, pi]."""
    return math.pi - rng.uniform(0.0, 2.0 * math.pi, shape)


def _uniform_vec(rng, shape, dim):
    b = 6.0 / math.sqrt(dim)
    return rng.uniform(-b, b, shape)


def _init_compound_relation(spec, rng, n_relations):
    nb = spec.n_blocks
    counts = OP_PARAM_COUNTS[spec.block_dim]
    n_sets = 2 if spec.compound_variant == "complete" else 1
    parts = []
    for _ in range(n_sets):
        for kind in spec.compound_ops:
            c = counts[kind]
            if kind == "S":
                parts.append(np.ones((n_relations, nb, c)))
            elif kind == "R":
                parts.append(_uniform_angles(rng, (n_relations, nb, c)))
            elif kind == "F":
                raw = rng.standard_normal((n_relations, nb, c))
                parts.append(raw)  # stored raw; normalized when operators are built
            else:  # T, H start at the identity operator
                parts.append(np.zeros((n_relations, nb, c)))
    # interleave per block: [block0 ops..., block1 ops...] for each set
    per_set = len(spec.compound_ops)
    sets = [parts[i * per_set:(i + 1) * per_set] for i in range(n_sets)]
    cols = [np.concatenate(s, axis=2).reshape(n_relations, -1) for s in sets]
    return np.concatenate(cols, axis=1)


def init_embeddings(spec, vocab, seed, dtype=np.float32):
    """Deterministic table init for a vocabulary (or an (n_e, n_r) pair).

    Plain vector parts are uniform in +-6/sqrt(dim); angle parts uniform
    in (-pi, pi]; scales start at exactly 1, translations of compound
    operators and shear coefficients at 0; projection matrices start as
    the rectangular identity; the TuckER core is small uniform noise.
    """
    if hasattr(vocab, "n_entities"):
        n_entities, n_relations = vocab.n_entities, vocab.n_relations
    else:
        n_entities, n_relations = vocab
    rng = np.random.default_rng(seed)
    d, k = spec.entity_dim, spec.relation_dim
    family = spec.family

    if family == "HAKE":
        phases = _uniform_angles(rng, (n_entities, d))
        moduli = _uniform_vec(rng, (n_entities, d), d)
        entities = np.concatenate([phases, moduli], axis=1)
    else:
        entities = _uniform_vec(rng, (n_entities, entity_width(spec)), d)

    if family == "RotatE":
        relations = _uniform_angles(rng, (n_relations, d // 2))
    elif family == "HAKE":
        r_phase = _uniform_angles(rng, (n_relations, d))
        r_mod = _uniform_vec(rng, (n_relations, d), d)
        r_modp = rng.uniform(-0.5, 0.5, (n_relations, d))
        relations = np.concatenate([r_phase, r_mod, r_modp], axis=1)
    elif family == "TransR":
        mat = np.zeros((n_relations, k, d))
        mat[:, np.arange(min(k, d)), np.arange(min(k, d))] = 1.0
        vec = _uniform_vec(rng, (n_relations, k), k)
        relations = np.concatenate([mat.reshape(n_relations, -1), vec], axis=1)
    elif family == "TransM":
        vec = _uniform_vec(rng, (n_relations, d), d)
        relations = np.concatenate([vec, np.ones((n_relations, 1))], axis=1)
    elif family in ("CompoundE", "CompoundE3D"):
        relations = _init_compound_relation(spec, rng, n_relations)
    elif family == "RESCAL":
        relations = _uniform_vec(rng, (n_relations, d * d), d)
    elif family == "TransD":
        relations = _uniform_vec(rng, (n_relations, 2 * k), k)
    elif family == "TransH":
        relations = _uniform_vec(rng, (n_relations, 2 * d), d)
    elif family in ("PairRE", "SimplE"):
        relations = _uniform_vec(rng, (n_relations, 2 * d), d)
    elif family == "TuckER":
        relations = _uniform_vec(rng, (n_relations, k), k)
    else:
        relations = _uniform_vec(rng, (n_relations, relation_width(spec)), d)

    core = None
    if family == "TuckER":
        core = rng.uniform(-0.1, 0.1, core_shape(spec))

    return EmbeddingTable(
        spec,
        np.ascontiguousarray(entities, dtype=dtype),
        np.ascontiguousarray(relations, dtype=dtype),
        None if core is None else np.ascontiguousarray(core, dtype=dtype),
    )


# family -> (score_fn, grad_fn), populated by the implementation modules
_REGISTRY = {}


def register(family, score_fn, grad_fn):
    _REGISTRY[family] = (score_fn, grad_fn)


def _check_ids(table, H, R, T):
    n_e, n_r = table.n_entities, table.n_relations
    for name, arr, bound in (("head", H, n_e), ("relation", R, n_r), ("tail", T, n_e)):
        if arr.size and (arr.min() < 0 or arr.max() >= bound):
            raise BoundsError(f"{name} id out of range [0, {bound})")


def _check_rows(table, H, R, T):
    rows = np.concatenate([table.entities[H].ravel(), table.relations[R].ravel(), table.entities[T].ravel()])
    if not np.all(np.isfinite(rows)):
        raise CorruptTableError("non-finite values in embedding table")
    if table.core is not None and not np.all(np.isfinite(table.core)):
        raise CorruptTableError("non-finite values in core tensor")


def score_batch(spec, table, H, R, T, check=True):
    """Canonical scores for id triples (vectorized)."""
    H = np.asarray(H, dtype=np.int64)
    R = np.asarray(R, dtype=np.int64)
    T = np.asarray(T, dtype=np.int64)
    if check:
        _check_ids(table, H, R, T)
        _check_rows(table, H, R, T)
    score_fn, _ = _REGISTRY[spec.family]
    return score_fn(spec, table, H, R, T)


def grad_batch(spec, table, H, R, T, upstream, check=True):
    """Per-occurrence gradient blocks [(slot, rows, grads)] of
    sum(upstream * score)."""
    H = np.asarray(H, dtype=np.int64)
    R = np.asarray(R, dtype=np.int64)
    T = np.asarray(T, dtype=np.int64)
    upstream = np.asarray(upstream, dtype=table.dtype)
    if check:
        _check_ids(table, H, R, T)
        _check_rows(table, H, R, T)
    _, grad_fn = _REGISTRY[spec.family]
    return grad_fn(spec, table, H, R, T, upstream)


def score(spec, table, h_id, r_id, t_id):
    """Score a single triple (canonical orientation, higher is better)."""
    return float(score_batch(spec, table, [h_id], [r_id], [t_id])[0])


def grad(spec, table, triple, upstream=1.0):
    """Sparse gradient of ``upstream * score(triple)``.

    Returns [(slot, row_id, gradient_vector)] with one entry per touched
    parameter row; contributions to the same row (e.g. a self-loop where
    head == tail) are summed.
    """
    h, r, t = triple
    blocks = grad_batch(spec, table, [h], [r], [t], [upstream])
    merged = {}
    for slot, rows, grads in blocks:
        for row, g in zip(rows.tolist(), grads):
            key = (slot, row)
            if key in merged:
                merged[key] = merged[key] + g
            else:
                merged[key] = g.copy()
    return [(slot, row, g) for (slot, row), g in merged.items()]


def score_candidates(spec, table, anchor_id, r_id, side):
    """Scores of every entity substituted at ``side`` ("head" or "tail")."""
    n = table.n_entities
    cands = np.arange(n, dtype=np.int64)
    anchors = np.full(n, anchor_id, dtype=np.int64)
    rels = np.full(n, r_id, dtype=np.int64)
    if side == "tail":
        return score_batch(spec, table, anchors, rels, cands)
    if side == "head":
        return score_batch(spec, table, cands, rels, anchors)
    raise ValueError(f"side must be 'head' or 'tail', got {side!r}")


# ---------------------------------------------------------------------------
# shared numeric helpers

def p_norm(res, p):
    """Row-wise L1 or L2 norm of a residual matrix (m, d)."""
    if p == 1:
        return np.abs(res).sum(axis=-1)
    return np.sqrt((res * res).sum(axis=-1))


def p_norm_grad(res, p):
    """d||res||_p / d res, with the subgradient at kinks set to 0."""
    if p == 1:
        return np.sign(res)
    n = p_norm(res, 2)
    out = np.zeros_like(res)
    nz = n > 0
    out[nz] = res[nz] / n[nz, None]
    return out


def interleaved_parts(arr):
    """Real/imag views of an interleaved complex layout."""
    return arr[..., 0::2], arr[..., 1::2]


def interleave(re, im):
    out = np.empty(re.shape[:-1] + (2 * re.shape[-1],), dtype=re.dtype)
    out[..., 0::2] = re
    out[..., 1::2] = im
    return out
