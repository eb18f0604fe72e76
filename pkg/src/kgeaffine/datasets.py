"""Triple files, vocabularies, splits, and the filter index.

Datasets are tab-separated text files, one ``head<TAB>relation<TAB>tail``
triple per line. Ids are dense integers assigned in first-appearance
order over train, then valid, then test, so reloading the same files
always reproduces the same ids.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BoundsError, EmptySplitError, TripleParseError

log = logging.getLogger(__name__)

SPLITS = ("train", "valid", "test")

# Published statistics for the common benchmark datasets (entity count,
# relation count, split sizes). Loader output is compared against these
# and discrepancies are logged, never fatal: the files on disk win.
REFERENCE_STATS = {
    "kinship": {"entities": 104, "relations": 26, "train": 8544, "valid": 1068, "test": 1074},
    "umls": {"entities": 135, "relations": 49, "train": 5216, "valid": 652, "test": 661},
    "countries": {"entities": 272, "relations": 2, "train": 1111, "valid": 24, "test": 24},
    "fb15k": {"entities": 14951, "relations": 1345, "train": 483142, "valid": 50000, "test": 59071},
    "fb15k-237": {"entities": 14951, "relations": 237, "train": 272115, "valid": 17535, "test": 20466},
    "wn18": {"entities": 40943, "relations": 18, "train": 141442, "valid": 5000, "test": 5000},
    "wn18rr": {"entities": 40943, "relations": 11, "train": 86835, "valid": 3034, "test": 3134},
    "yago3-10": {"entities": 123182, "relations": 37, "train": 1079040, "valid": 5000, "test": 5000},
}


class Vocabulary:
    """Bijective name<->id maps for entities and relations."""

    def __init__(self, entity_names, relation_names):
        self.entity_names = list(entity_names)
        self.relation_names = list(relation_names)
        self.entity_ids = {name: i for i, name in enumerate(self.entity_names)}
        self.relation_ids = {name: i for i, name in enumerate(self.relation_names)}
        if len(self.entity_ids) != len(self.entity_names):
            raise ValueError("duplicate entity names")
        if len(self.relation_ids) != len(self.relation_names):
            raise ValueError("duplicate relation names")

    @property
    def n_entities(self):
        return len(self.entity_names)

    @property
    def n_relations(self):
        return len(self.relation_names)

    def entity_id(self, name):
        return self.entity_ids[name]

    def relation_id(self, name):
        return self.relation_ids[name]

    def digest(self):
        """Hex digest identifying this vocabulary (order-sensitive)."""
        import hashlib

        h = hashlib.sha256()
        for name in self.entity_names:
            h.update(name.encode("utf-8") + b"\x00")
        h.update(b"\x01")
        for name in self.relation_names:
            h.update(name.encode("utf-8") + b"\x00")
        return h.hexdigest()

    def save(self, directory):
        """Write ``entities.tsv`` and ``relations.tsv`` (name<TAB>id)."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for fname, names in (("entities.tsv", self.entity_names), ("relations.tsv", self.relation_names)):
            with open(directory / fname, "w", encoding="utf-8") as fh:
                for i, name in enumerate(names):
                    fh.write(f"{name}\t{i}\n")

    @classmethod
    def load(cls, directory):
        directory = Path(directory)
        names = {}
        for fname in ("entities.tsv", "relations.tsv"):
            rows = []
            with open(directory / fname, encoding="utf-8") as fh:
                for line in fh:
                    name, idx = line.rstrip("\n").split("\t")
                    rows.append((int(idx), name))
            rows.sort()
            if [i for i, _ in rows] != list(range(len(rows))):
                raise ValueError(f"{fname}: ids are not contiguous from 0")
            names[fname] = [n for _, n in rows]
        return cls(names["entities.tsv"], names["relations.tsv"])


@dataclass
class DatasetStats:
    entities: int
    relations: int
    train: int
    valid: int
    test: int
    avg_degree: float            # 2 * |train| / entities, graph-theoretic
    triples_per_entity: float    # |train| / entities, the figure benchmark tables list
    duplicates: dict = field(default_factory=dict)

    def to_json(self):
        """One-line JSON object with all fields."""
        return json.dumps(self.__dict__, sort_keys=True)


class TripleStore:
    """Immutable id-level triples with a known-true filter index."""

    def __init__(self, vocab, train, valid, test, duplicates=None):
        self.vocab = vocab
        self.train = np.asarray(train, dtype=np.int64).reshape(-1, 3)
        self.valid = np.asarray(valid, dtype=np.int64).reshape(-1, 3)
        self.test = np.asarray(test, dtype=np.int64).reshape(-1, 3)
        self.duplicates = dict(duplicates or {})
        self._check_bounds()

        self._all = {tuple(t) for split in (self.train, self.valid, self.test) for t in split.tolist()}
        self._tails_of = {}  # (h, r) -> set of true tails over all splits
        self._heads_of = {}  # (r, t) -> set of true heads over all splits
        for h, r, t in self._all:
            self._tails_of.setdefault((h, r), set()).add(t)
            self._heads_of.setdefault((r, t), set()).add(h)

    def _check_bounds(self):
        n_e, n_r = self.vocab.n_entities, self.vocab.n_relations
        for name in SPLITS:
            arr = getattr(self, name)
            if arr.size == 0:
                continue
            if arr[:, [0, 2]].min() < 0 or arr[:, [0, 2]].max() >= n_e:
                raise BoundsError(f"{name}: entity id out of range [0, {n_e})")
            if arr[:, 1].min() < 0 or arr[:, 1].max() >= n_r:
                raise BoundsError(f"{name}: relation id out of range [0, {n_r})")

    def split(self, name):
        if name not in SPLITS:
            raise ValueError(f"unknown split {name!r}")
        return getattr(self, name)

    def is_true(self, h, r, t):
        return (h, r, t) in self._all

    def true_tails(self, h, r):
        return self._tails_of.get((h, r), set())

    def true_heads(self, r, t):
        return self._heads_of.get((r, t), set())

    def filtered_candidates(self, query, target_id):
        """Entity ids that keep the query unseen, plus the target itself.

        ``query`` is ``(head_id, relation_id, None)`` for a tail query or
        ``(None, relation_id, tail_id)`` for a head query. All known-true
        completions other than ``target_id`` are removed.
        """
        h, r, t = query
        n = self.vocab.n_entities
        if not (0 <= target_id < n):
            raise BoundsError(f"target id {target_id} out of range [0, {n})")
        if not (0 <= r < self.vocab.n_relations):
            raise BoundsError(f"relation id {r} out of range [0, {self.vocab.n_relations})")
        if t is None:
            if not (0 <= h < n):
                raise BoundsError(f"head id {h} out of range [0, {n})")
            known = self.true_tails(h, r)
        elif h is None:
            if not (0 <= t < n):
                raise BoundsError(f"tail id {t} out of range [0, {n})")
            known = self.true_heads(r, t)
        else:
            raise ValueError("query must leave exactly one of head/tail as None")
        mask = np.ones(n, dtype=bool)
        if known:
            mask[list(known)] = False
        mask[target_id] = True
        return np.flatnonzero(mask)

    def candidate_mask(self, query, target_id):
        """Boolean variant of :meth:`filtered_candidates` (uint8, length n)."""
        h, r, t = query
        n = self.vocab.n_entities
        mask = np.ones(n, dtype=np.uint8)
        known = self.true_tails(h, r) if t is None else self.true_heads(r, t)
        if known:
            mask[list(known)] = 0
        mask[target_id] = 1
        return mask


def _read_triple_file(path):
    triples = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise TripleParseError(path, line_no, line)
            triples.append(tuple(parts))
    return triples


def load_dataset(train_path, valid_path, test_path):
    """Read the three split files and build (Vocabulary, TripleStore).

    Duplicate lines within a split are dropped (first occurrence kept)
    and counted. Entities seen only in valid/test stay in the vocabulary
    but are reported, since nothing trains their embeddings.
    """
    raw = {
        "train": _read_triple_file(train_path),
        "valid": _read_triple_file(valid_path),
        "test": _read_triple_file(test_path),
    }
    if not raw["train"]:
        raise EmptySplitError(f"training split {train_path} is empty")

    entity_names, relation_names = [], []
    seen_e, seen_r = set(), set()
    for split in SPLITS:
        for h, r, t in raw[split]:
            if h not in seen_e:
                seen_e.add(h)
                entity_names.append(h)
            if r not in seen_r:
                seen_r.add(r)
                relation_names.append(r)
            if t not in seen_e:
                seen_e.add(t)
                entity_names.append(t)
    vocab = Vocabulary(entity_names, relation_names)

    ids = {}
    duplicates = {}
    for split in SPLITS:
        seen = set()
        rows = []
        dups = 0
        for h, r, t in raw[split]:
            triple = (vocab.entity_id(h), vocab.relation_id(r), vocab.entity_id(t))
            if triple in seen:
                dups += 1
                continue
            seen.add(triple)
            rows.append(triple)
        ids[split] = np.array(rows, dtype=np.int64).reshape(-1, 3)
        duplicates[split] = dups
        if dups:
            log.warning("%s: dropped %d duplicate triples", split, dups)

    store = TripleStore(vocab, ids["train"], ids["valid"], ids["test"], duplicates)

    train_entities = set(ids["train"][:, 0].tolist()) | set(ids["train"][:, 2].tolist())
    cold = [vocab.entity_names[i] for i in range(vocab.n_entities) if i not in train_entities]
    if cold:
        log.warning(
            "%d entities appear only in valid/test and receive no gradient: %s%s",
            len(cold), ", ".join(cold[:10]), "..." if len(cold) > 10 else "",
        )
    return vocab, store


def compute_stats(store):
    """Counts and degree figures for a loaded store."""
    vocab = store.vocab
    n_train = len(store.train)
    return DatasetStats(
        entities=vocab.n_entities,
        relations=vocab.n_relations,
        train=n_train,
        valid=len(store.valid),
        test=len(store.test),
        avg_degree=round(2.0 * n_train / vocab.n_entities, 2),
        triples_per_entity=round(n_train / vocab.n_entities, 2),
        duplicates=dict(store.duplicates),
    )


def compare_reference(stats, name):
    """Deltas between loader-reported stats and the published figures.

    Returns ``{field: (loaded, reference)}`` for mismatching fields only.
    Unknown dataset names raise KeyError.
    """
    ref = REFERENCE_STATS[name.lower()]
    deltas = {}
    for key, expected in ref.items():
        got = getattr(stats, key)
        if got != expected:
            deltas[key] = (got, expected)
    if deltas:
        log.warning("stats for %s differ from published figures: %s", name, deltas)
    return deltas
