"""Mini-batch training, optimizers, checkpoints, and derivative checks.

Training is single-threaded and fully deterministic for a fixed seed:
the same config and store produce byte-identical checkpoints. Gradients
from all triples in a batch are summed per parameter row before one
optimizer step; the loss value reported per epoch is the mean per
positive triple.
"""

import json
import logging
import struct
import zlib
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import kernels
from .errors import (
    CheckpointCorruptError,
    CheckpointVersionError,
    DivergenceError,
    SchemaError,
    VocabDigestError,
)
from .evaluation import evaluate
from .models import (
    FAMILIES,
    EmbeddingTable,
    ModelSpec,
    grad,
    grad_batch,
    init_embeddings,
    score,
    score_batch,
)
from .models import compound as _compound
from .models import distance as _distance
from .objectives import LOSS_KINDS, NEGATIVE_MODES, LossParams, loss, sample_negatives

log = logging.getLogger(__name__)

OPTIMIZERS = ("sgd", "adagrad")
ADAGRAD_EPS = 1e-10
CHECKPOINT_MAGIC = b"KGEF"
CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    model: str = "TransE"
    entity_dim: int = 128
    relation_dim: int = None
    p_norm: int = 1
    compound_variant: str = "head"
    compound_ops: list = None
    shear_form: str = "product"
    hake_lambda: float = 0.5
    loss: str = "self_adversarial"
    margin: float = 6.0
    limit_mu: float = 1.0
    limit_lambda: float = 1.0
    mu_pos: float = 0.5
    mu_neg: float = 3.0
    adversarial_temperature: float = 1.0
    nll_form: str = "softplus"
    negatives: int = 16
    negative_mode: str = "uniform"
    batch_size: int = 256
    epochs: int = 100
    learning_rate: float = 0.1
    optimizer: str = "adagrad"
    seed: int = 0
    entity_norm_constraint: bool = False
    eval_every: int = 0
    patience: int = 0

    @classmethod
    def from_dict(cls, raw):
        """Build from a flat JSON object, reporting every bad field."""
        known = {f.name for f in fields(cls)}
        problems = [f"unknown field {k!r}" for k in raw if k not in known]
        cfg = cls(**{k: v for k, v in raw.items() if k in known})
        problems += cfg.problems()
        if problems:
            raise SchemaError(problems)
        return cfg

    def problems(self):
        p = []
        if self.model not in FAMILIES:
            p.append(f"model: unknown family {self.model!r}")
        if self.loss not in LOSS_KINDS:
            p.append(f"loss: unknown kind {self.loss!r}")
        if self.optimizer not in OPTIMIZERS:
            p.append(f"optimizer: must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if self.negative_mode not in NEGATIVE_MODES:
            p.append(f"negative_mode: must be one of {NEGATIVE_MODES}")
        for name in ("entity_dim", "negatives", "batch_size"):
            if not isinstance(getattr(self, name), int) or getattr(self, name) < 1:
                p.append(f"{name}: must be a positive integer")
        for name in ("epochs", "eval_every", "patience", "seed"):
            if not isinstance(getattr(self, name), int) or getattr(self, name) < 0:
                p.append(f"{name}: must be a non-negative integer")
        if not isinstance(self.learning_rate, (int, float)) or self.learning_rate < 0:
            p.append("learning_rate: must be >= 0")
        if self.p_norm not in (1, 2):
            p.append("p_norm: must be 1 or 2")
        if not p:
            try:
                self.spec()
            except Exception as exc:
                p.append(f"model spec: {exc}")
            try:
                self.loss_params().validate(self.loss)
            except Exception as exc:
                p.append(f"loss params: {exc}")
        return p

    def validate(self):
        p = self.problems()
        if p:
            raise SchemaError(p)

    def spec(self):
        return ModelSpec(
            family=self.model,
            entity_dim=self.entity_dim,
            relation_dim=self.relation_dim,
            p_norm=self.p_norm,
            compound_variant=self.compound_variant,
            compound_ops=tuple(self.compound_ops) if self.compound_ops else None,
            shear_form=self.shear_form,
            hake_lambda=self.hake_lambda,
        )

    def loss_params(self):
        return LossParams(
            margin=self.margin,
            limit_mu=self.limit_mu,
            limit_lambda=self.limit_lambda,
            mu_pos=self.mu_pos,
            mu_neg=self.mu_neg,
            adversarial_temperature=self.adversarial_temperature,
            nll_form=self.nll_form,
        )

    def to_dict(self):
        return asdict(self)


def _slot_views(table):
    """2D views of every parameter slot (core flattened to one row)."""
    views = {"entities": table.entities, "relations": table.relations}
    if table.core is not None:
        views["core"] = table.core.reshape(1, -1)
    return views


class Optimizer:
    """SGD or Adagrad over sparse row updates of the table slots."""

    def __init__(self, kind, lr, table, state=None):
        if kind not in OPTIMIZERS:
            raise SchemaError([f"optimizer: unknown kind {kind!r}"])
        self.kind = kind
        self.lr = float(lr)
        if kind == "adagrad":
            self.accum = state if state is not None else {
                name: np.zeros_like(arr) for name, arr in _slot_views(table).items()
            }
        else:
            self.accum = {}

    def step(self, slot_views, slot, rows, grads):
        """One update on unique ``rows`` of ``slot_views[slot]``."""
        arr = slot_views[slot]
        rows = np.ascontiguousarray(rows, dtype=np.int64)
        grads = np.ascontiguousarray(grads, dtype=arr.dtype)
        if self.kind == "sgd":
            kernels.sgd_update(arr, rows, grads, self.lr)
        else:
            kernels.adagrad_update(arr, self.accum[slot], rows, grads, self.lr, ADAGRAD_EPS)


def aggregate_gradients(blocks, dtype):
    """Sum per-occurrence gradient blocks into unique rows per slot."""
    per_slot = {}
    for slot, rows, grads in blocks:
        per_slot.setdefault(slot, []).append((rows, grads))
    out = {}
    for slot, parts in sorted(per_slot.items()):
        rows = np.concatenate([r for r, _ in parts])
        grads = np.concatenate([np.asarray(g, dtype=dtype) for _, g in parts])
        uniq, inv = np.unique(rows, return_inverse=True)
        agg = np.zeros((len(uniq), grads.shape[1]), dtype=dtype)
        kernels.scatter_add_rows(agg, np.ascontiguousarray(inv, dtype=np.int64),
                                 np.ascontiguousarray(grads))
        out[slot] = (uniq, agg)
    return out


@dataclass
class Checkpoint:
    spec: ModelSpec
    vocab_digest: str
    table: EmbeddingTable
    optimizer_kind: str
    learning_rate: float
    optimizer_state: dict
    epoch: int
    rng_state: dict

    def digest(self):
        """Digest of the serialized bytes, for equality checks."""
        import hashlib
        return hashlib.sha256(checkpoint_bytes(self)).hexdigest()


def _renormalize(entities, rows):
    """Project the given entity rows onto the unit L2 ball."""
    sub = entities[rows]
    norms = np.sqrt((sub * sub).sum(axis=1, keepdims=True))
    over = norms[:, 0] > 1.0
    if over.any():
        sub[over] /= norms[over]
        entities[rows] = sub


def train(config, store, progress=None, resume=None):
    """Run the configured training loop over the store's train split.

    Passing ``resume`` (a Checkpoint of the same config and vocabulary)
    continues at its stored epoch, parameters, optimizer state, and RNG
    state, reproducing the exact trajectory of an uninterrupted run.
    Early-stop counters are not persisted and restart on resume.
    """
    config.validate()
    n_train = len(store.train)
    if config.batch_size > n_train:
        raise SchemaError([f"batch_size: {config.batch_size} exceeds the {n_train}-triple train split"])
    spec = config.spec()
    rng = np.random.default_rng(config.seed)
    start_epoch = 0
    if resume is None:
        table = init_embeddings(spec, store.vocab, config.seed, dtype=np.float32)
        opt = Optimizer(config.optimizer, config.learning_rate, table)
    else:
        if resume.vocab_digest != store.vocab.digest():
            raise VocabDigestError("resume checkpoint was trained against a different vocabulary")
        if resume.spec != spec:
            raise SchemaError(["model spec differs from the resume checkpoint"])
        table = resume.table.copy()
        state = {k: v.copy() for k, v in resume.optimizer_state.items()} or None
        opt = Optimizer(config.optimizer, config.learning_rate, table, state=state)
        rng.bit_generator.state = resume.rng_state
        start_epoch = resume.epoch
    params = config.loss_params()
    views = _slot_views(table)
    best_mrr, stale = -1.0, 0
    epochs_run = start_epoch

    for epoch in range(start_epoch, config.epochs):
        perm = rng.permutation(n_train)
        batch_losses = []
        for b, start in enumerate(range(0, n_train, config.batch_size)):
            pos = store.train[perm[start: start + config.batch_size]]
            negs = sample_negatives(store, pos, config.negatives, config.negative_mode, rng)
            neg_flat = negs.flat()
            pos_scores = score_batch(spec, table, pos[:, 0], pos[:, 1], pos[:, 2], check=False)
            neg_scores = score_batch(
                spec, table, neg_flat[:, 0], neg_flat[:, 1], neg_flat[:, 2], check=False
            ).reshape(len(pos), -1)
            if not (np.all(np.isfinite(pos_scores)) and np.all(np.isfinite(neg_scores))):
                raise DivergenceError(epoch, b)
            value, (gpos, gneg) = loss(config.loss, pos_scores, neg_scores, params)
            if not np.isfinite(value):
                raise DivergenceError(epoch, b)
            scale = 1.0 / len(pos)
            batch_losses.append(value * scale)
            blocks = grad_batch(spec, table, pos[:, 0], pos[:, 1], pos[:, 2],
                                gpos * scale, check=False)
            blocks += grad_batch(spec, table, neg_flat[:, 0], neg_flat[:, 1], neg_flat[:, 2],
                                 gneg.reshape(-1) * scale, check=False)
            for slot, (rows, grads) in aggregate_gradients(blocks, table.dtype).items():
                opt.step(views, slot, rows, grads)
            if config.entity_norm_constraint:
                touched = np.unique(np.concatenate([pos[:, 0], pos[:, 2],
                                                    neg_flat[:, 0], neg_flat[:, 2]]))
                _renormalize(table.entities, touched)

        epoch_loss = float(np.mean(batch_losses))
        epochs_run = epoch + 1
        val_mrr = None
        if config.eval_every and (epoch + 1) % config.eval_every == 0 and len(store.valid):
            val_mrr = evaluate(spec, table, store.valid, store).mrr_filtered
        line = f"epoch={epoch} loss={epoch_loss:.6f}"
        if val_mrr is not None:
            line += f" val_mrr={val_mrr:.4f}"
        (progress or log.info)(line)
        if val_mrr is not None and config.patience:
            if val_mrr > best_mrr + 1e-9:
                best_mrr, stale = val_mrr, 0
            else:
                stale += 1
                if stale >= config.patience:
                    log.info("early stop: no val_mrr gain in %d evals", config.patience)
                    break

    return Checkpoint(
        spec=spec,
        vocab_digest=store.vocab.digest(),
        table=table,
        optimizer_kind=config.optimizer,
        learning_rate=config.learning_rate,
        optimizer_state=opt.accum,
        epoch=epochs_run,
        rng_state=rng.bit_generator.state,
    )


# ---------------------------------------------------------------------------
# checkpoint serialization: KGEF magic, u32 version, JSON header, raw
# little-endian arrays, trailing CRC32

def _le(arr):
    a = np.ascontiguousarray(arr)
    if a.dtype.byteorder == ">":
        a = a.astype(a.dtype.newbyteorder("<"))
    return a


def checkpoint_bytes(ckpt):
    arrays = [("entities", ckpt.table.entities), ("relations", ckpt.table.relations)]
    if ckpt.table.core is not None:
        arrays.append(("core", ckpt.table.core))
    for name, arr in sorted(ckpt.optimizer_state.items()):
        arrays.append((f"accum_{name}", arr))
    header = {
        "spec": ckpt.spec.to_dict(),
        "vocab_digest": ckpt.vocab_digest,
        "optimizer": {"kind": ckpt.optimizer_kind, "lr": ckpt.learning_rate},
        "epoch": ckpt.epoch,
        "rng_state": ckpt.rng_state,
        "arrays": [
            {"name": name, "shape": list(arr.shape), "dtype": _le(arr).dtype.str}
            for name, arr in arrays
        ],
    }
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    out = bytearray()
    out += CHECKPOINT_MAGIC
    out += struct.pack("<I", CHECKPOINT_VERSION)
    out += struct.pack("<I", len(head))
    out += head
    for _, arr in arrays:
        out += _le(arr).tobytes()
    out += struct.pack("<I", zlib.crc32(bytes(out)) & 0xFFFFFFFF)
    return bytes(out)


def save_checkpoint(ckpt, path):
    with open(path, "wb") as fh:
        fh.write(checkpoint_bytes(ckpt))


def load_checkpoint(path, expected_digest=None):
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16 or blob[:4] != CHECKPOINT_MAGIC:
        raise CheckpointCorruptError(f"{path}: not a KGEF checkpoint")
    crc = struct.unpack("<I", blob[-4:])[0]
    if zlib.crc32(blob[:-4]) & 0xFFFFFFFF != crc:
        raise CheckpointCorruptError(f"{path}: CRC mismatch (truncated or corrupted)")
    version = struct.unpack("<I", blob[4:8])[0]
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(f"{path}: unsupported version {version}")
    head_len = struct.unpack("<I", blob[8:12])[0]
    try:
        header = json.loads(blob[12: 12 + head_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointCorruptError(f"{path}: bad header ({exc})") from exc
    if expected_digest is not None and header["vocab_digest"] != expected_digest:
        raise VocabDigestError(
            f"{path}: checkpoint was trained against a different vocabulary"
        )
    offset = 12 + head_len
    loaded = {}
    for meta in header["arrays"]:
        dtype = np.dtype(meta["dtype"])
        count = int(np.prod(meta["shape"])) if meta["shape"] else 1
        end = offset + count * dtype.itemsize
        if end > len(blob) - 4:
            raise CheckpointCorruptError(f"{path}: truncated array {meta['name']}")
        loaded[meta["name"]] = np.frombuffer(
            blob[offset:end], dtype=dtype
        ).reshape(meta["shape"]).copy()
        offset = end
    spec = ModelSpec.from_dict(header["spec"])
    table = EmbeddingTable(spec, loaded["entities"], loaded["relations"], loaded.get("core"))
    state = {
        name[len("accum_"):]: arr for name, arr in loaded.items() if name.startswith("accum_")
    }
    return Checkpoint(
        spec=spec,
        vocab_digest=header["vocab_digest"],
        table=table,
        optimizer_kind=header["optimizer"]["kind"],
        learning_rate=header["optimizer"]["lr"],
        optimizer_state=state,
        epoch=header["epoch"],
        rng_state=header["rng_state"],
    )


# ---------------------------------------------------------------------------
# finite-difference verification of the analytic derivatives

def default_check_spec(family):
    """Small double-check spec per family (tiny dims keep FD cheap)."""
    if family == "QuatE":
        return ModelSpec(family, entity_dim=8)
    if family in ("TransR", "TransD"):
        return ModelSpec(family, entity_dim=6, relation_dim=4, p_norm=2)
    if family == "TuckER":
        return ModelSpec(family, entity_dim=4, relation_dim=3)
    if family == "CompoundE3D":
        return ModelSpec(family, entity_dim=6)
    return ModelSpec(family, entity_dim=6)


def _check_table(spec, n_entities, n_relations, seed):
    """float64 table at a generic position (init plus small noise)."""
    table = init_embeddings(spec, (n_entities, n_relations), seed, dtype=np.float64)
    rng = np.random.default_rng(seed + 1)
    table.entities += rng.uniform(-0.05, 0.05, table.entities.shape)
    table.relations += rng.uniform(-0.05, 0.05, table.relations.shape)
    if table.core is not None:
        table.core += rng.uniform(-0.05, 0.05, table.core.shape)
    return table


def _kink_margin(spec, table, h, r, t):
    """Distance to the nearest non-differentiable point for this probe."""
    fam = spec.family
    H, R, T = np.array([h]), np.array([r]), np.array([t])

    def norm_margin(res, p):
        res = np.abs(np.asarray(res, dtype=np.float64)).ravel()
        return float(res.min()) if p == 1 else float(np.sqrt((res * res).sum()))

    if fam in ("TransE", "TransM"):
        rel = table.relations[r]
        vec = rel[:-1] if fam == "TransM" else rel
        return norm_margin(table.entities[h] + vec - table.entities[t], spec.p_norm)
    if fam == "RotatE":
        *_, er, ei = _distance._rotate_parts(spec, table, H, R, T)
        mod = np.sqrt(er * er + ei * ei)
        return float(mod.min()) if spec.p_norm == 1 else float(np.sqrt((mod * mod).sum()))
    if fam == "PairRE":
        res = _distance._pairre_parts(spec, table, H, R, T)[-1]
        return norm_margin(res, spec.p_norm)
    if fam == "HAKE":
        _, _, _, _, _, _, rmp_raw, _, phi, _, v = _distance._hake_parts(spec, table, H, R, T)
        clamp = np.minimum(np.abs(rmp_raw - (1 - 1e-3)), np.abs(rmp_raw - (-1 + 1e-3)))
        return float(min(np.abs(np.sin(phi)).min(), np.sqrt((v * v).sum()), clamp.min()))
    if fam in ("CompoundE", "CompoundE3D"):
        res = _compound._compound_residual(spec, table, H, R, T, want_grads=False)[2]
        return norm_margin(res, spec.p_norm)
    if fam == "TransH":
        d = spec.entity_dim
        return float(np.linalg.norm(table.relations[r][:d]))
    if fam == "QuatE":
        dq = spec.entity_dim // 4
        quad = table.relations[r].reshape(4, dq)
        return float(np.sqrt((quad * quad).sum(axis=0)).min())
    return np.inf


def gradient_check(spec, n_probes=100, tol=1e-4, seed=0, step=1e-5,
                   n_entities=9, n_relations=5, grad_fn=None):
    """Analytic gradients vs central finite differences, double precision.

    Probes within 1e-4 of a norm kink or clamp boundary are resampled
    (this subsumes the minimum 1e-6 exclusion: a central difference with
    step 1e-5 straddling a kink says nothing about the derivative).
    """
    rng = np.random.default_rng(seed)
    table = _check_table(spec, n_entities, n_relations, seed)
    views = _slot_views(table)
    grad_fn = grad_fn or grad
    max_err = 0.0
    for _ in range(n_probes):
        for _ in range(200):
            h, t = rng.integers(0, n_entities, 2)
            r = int(rng.integers(0, n_relations))
            if _kink_margin(spec, table, int(h), r, int(t)) > 1e-4:
                break
        else:
            raise RuntimeError(f"{spec.family}: could not find a differentiable probe")
        h, r, t = int(h), int(r), int(t)
        analytic = grad_fn(spec, table, (h, r, t))
        for slot, row, vec in analytic:
            arr = views[slot]
            for j in range(arr.shape[1]):
                keep = arr[row, j]
                arr[row, j] = keep + step
                up = score(spec, table, h, r, t)
                arr[row, j] = keep - step
                down = score(spec, table, h, r, t)
                arr[row, j] = keep
                fd = (up - down) / (2.0 * step)
                err = abs(vec[j] - fd) / max(1.0, abs(fd))
                max_err = max(max_err, err)
    return {"family": spec.family, "probes": n_probes, "max_rel_err": max_err,
            "tol": tol, "passed": bool(max_err < tol)}


def check_all_families(n_probes=100, tol=1e-4, seed=0):
    """Gradient report over every scoring family."""
    out = {}
    for family in FAMILIES:
        out[family] = gradient_check(default_check_spec(family), n_probes, tol, seed)
    return {"families": out, "tol": tol, "all_passed": all(v["passed"] for v in out.values())}


def check_loss_gradients(kind, n_probes=100, tol=1e-6, seed=0, step=1e-6):
    """Loss gradient coefficients vs central differences on random scores.

    The self-adversarial weights are part of the sampling distribution,
    not of the differentiated objective, so its finite differences run
    with the weights frozen at the center point.
    """
    from .objectives import _softplus, adversarial_weights

    rng = np.random.default_rng(seed)
    params = LossParams(margin=1.5, limit_mu=1.0, limit_lambda=0.7,
                        mu_pos=0.5, mu_neg=2.5, adversarial_temperature=0.8)
    max_err = 0.0
    for _ in range(n_probes):
        for _ in range(200):
            pos = rng.normal(0.0, 2.0, 3)
            neg = rng.normal(0.0, 2.0, (3, 4))
            dp, dn = -pos, -neg
            hinges = np.concatenate([
                (params.margin + dp[:, None] - dn).ravel(),
                dp - params.limit_mu,
                dp - params.mu_pos,
                (params.mu_neg - dn).ravel(),
            ])
            if np.abs(hinges).min() > 1e-4:
                break

        if kind == "self_adversarial":
            w0 = adversarial_weights(neg, params.adversarial_temperature)

            def value_at(p_arr, n_arr):
                return float(_softplus(-p_arr - params.margin).sum()
                             + (w0 * _softplus(params.margin + n_arr)).sum())
        else:
            def value_at(p_arr, n_arr):
                return loss(kind, p_arr, n_arr, params)[0]

        _, (gpos, gneg) = loss(kind, pos, neg, params)
        for arr, grads in ((pos, gpos), (neg, gneg)):
            flat, gflat = arr.ravel(), np.asarray(grads).ravel()
            for j in range(flat.size):
                keep = flat[j]
                flat[j] = keep + step
                up = value_at(pos, neg)
                flat[j] = keep - step
                down = value_at(pos, neg)
                flat[j] = keep
                fd = (up - down) / (2.0 * step)
                err = abs(gflat[j] - fd) / max(1.0, abs(fd))
                max_err = max(max_err, err)
    return {"loss": kind, "probes": n_probes, "max_rel_err": max_err,
            "tol": tol, "passed": bool(max_err < tol)}
