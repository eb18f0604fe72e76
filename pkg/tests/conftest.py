from pathlib import Path

import numpy as np
import pytest

from kgeaffine.datasets import TripleStore, Vocabulary, load_dataset

REPO = Path(__file__).resolve().parent.parent
DATA = REPO / "data"

BUNDLED = DATA / "modular135"


def dataset_paths(name):
    d = DATA / name
    return d / "train.txt", d / "valid.txt", d / "test.txt"


def has_dataset(name):
    return all(p.exists() for p in dataset_paths(name))


def make_store(n_entities, n_relations, train, valid=(), test=()):
    """TripleStore over synthetic names e0.., r0.. from id triples."""
    vocab = Vocabulary(
        [f"e{i}" for i in range(n_entities)],
        [f"r{i}" for i in range(n_relations)],
    )
    to_arr = lambda rows: np.array(list(rows), dtype=np.int64).reshape(-1, 3)
    return TripleStore(vocab, to_arr(train), to_arr(valid), to_arr(test))


@pytest.fixture(scope="session")
def bundled_store():
    if not has_dataset("modular135"):
        pytest.skip("bundled modular135 dataset missing; run scripts/make_bundled_dataset.py")
    _, store = load_dataset(*dataset_paths("modular135"))
    return store
