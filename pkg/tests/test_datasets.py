import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgeaffine.datasets import (
    REFERENCE_STATS,
    Vocabulary,
    compare_reference,
    compute_stats,
    load_dataset,
)
from kgeaffine.errors import BoundsError, EmptySplitError, TripleParseError

from conftest import dataset_paths, has_dataset, make_store


def write_split(path, triples):
    with open(path, "w", encoding="utf-8") as fh:
        for h, r, t in triples:
            fh.write(f"{h}\t{r}\t{t}\n")
    return path


@pytest.fixture
def toy_paths(tmp_path):
    train = write_split(tmp_path / "train.txt", [
        ("madrid", "capital_of", "spain"),
        ("paris", "capital_of", "france"),
        ("paris", "in_continent", "europe"),
    ])
    valid = write_split(tmp_path / "valid.txt", [("madrid", "in_continent", "europe")])
    test = write_split(tmp_path / "test.txt", [("spain", "in_continent", "europe")])
    return train, valid, test


class TestLoadDataset:
    def test_first_appearance_ids(self, toy_paths):
        vocab, store = load_dataset(*toy_paths)
        assert vocab.entity_names[:4] == ["madrid", "spain", "paris", "france"]
        assert vocab.relation_names == ["capital_of", "in_continent"]
        assert store.train.shape == (3, 3)
        assert tuple(store.train[0]) == (0, 0, 1)

    def test_roundtrip_ids_stable(self, toy_paths):
        vocab1, store1 = load_dataset(*toy_paths)
        vocab2, store2 = load_dataset(*toy_paths)
        assert vocab1.entity_ids == vocab2.entity_ids
        assert vocab1.relation_ids == vocab2.relation_ids
        assert np.array_equal(store1.train, store2.train)
        assert store1._tails_of == store2._tails_of
        assert store1._heads_of == store2._heads_of

    def test_duplicate_dedup_counted(self, tmp_path):
        train = write_split(tmp_path / "train.txt", [("a", "r", "b"), ("a", "r", "b")])
        valid = write_split(tmp_path / "valid.txt", [])
        test = write_split(tmp_path / "test.txt", [])
        _, store = load_dataset(train, valid, test)
        assert len(store.train) == 1
        assert store.duplicates["train"] == 1

    def test_malformed_line_names_file_and_line(self, tmp_path):
        train = tmp_path / "train.txt"
        train.write_text("a\tr\tb\nbad line without tabs\n", encoding="utf-8")
        valid = write_split(tmp_path / "valid.txt", [])
        test = write_split(tmp_path / "test.txt", [])
        with pytest.raises(TripleParseError) as exc:
            load_dataset(train, valid, test)
        assert exc.value.line_no == 2
        assert "train.txt" in str(exc.value)

    def test_empty_train_rejected(self, tmp_path):
        train = write_split(tmp_path / "train.txt", [])
        valid = write_split(tmp_path / "valid.txt", [])
        test = write_split(tmp_path / "test.txt", [])
        with pytest.raises(EmptySplitError):
            load_dataset(train, valid, test)

    def test_vocab_save_load_roundtrip(self, toy_paths, tmp_path):
        vocab, _ = load_dataset(*toy_paths)
        vocab.save(tmp_path / "vocab")
        again = Vocabulary.load(tmp_path / "vocab")
        assert again.entity_ids == vocab.entity_ids
        assert again.relation_ids == vocab.relation_ids
        assert again.digest() == vocab.digest()


class TestFilteredCandidates:
    def test_single_triple_keeps_everything(self):
        store = make_store(4, 1, [(0, 0, 1)])
        cands = store.filtered_candidates((0, 0, None), 1)
        assert set(cands.tolist()) == {0, 1, 2, 3}

    def test_known_competitor_removed(self):
        store = make_store(5, 1, [(0, 0, 1), (0, 0, 2)])
        cands = store.filtered_candidates((0, 0, None), 1)
        assert set(cands.tolist()) == {0, 1, 3, 4}

    def test_unseen_pair_keeps_full_entity_set(self):
        store = make_store(5, 2, [(0, 0, 1)])
        cands = store.filtered_candidates((3, 1, None), 2)
        assert len(cands) == 5

    def test_head_queries(self):
        store = make_store(5, 1, [(1, 0, 4), (2, 0, 4)])
        cands = store.filtered_candidates((None, 0, 4), 1)
        assert set(cands.tolist()) == {0, 1, 3, 4}

    def test_bounds_errors(self):
        store = make_store(3, 1, [(0, 0, 1)])
        with pytest.raises(BoundsError):
            store.filtered_candidates((0, 0, None), 7)
        with pytest.raises(BoundsError):
            store.filtered_candidates((9, 0, None), 1)
        with pytest.raises(BoundsError):
            store.filtered_candidates((0, 5, None), 1)

    @given(st.data())
    @settings(max_examples=60, deadline=None)
    def test_excludes_exactly_the_known_tails(self, data):
        n = data.draw(st.integers(3, 10))
        triples = data.draw(
            st.lists(
                st.tuples(st.integers(0, n - 1), st.integers(0, 2), st.integers(0, n - 1)),
                min_size=1, max_size=25, unique=True,
            )
        )
        store = make_store(n, 3, triples)
        h, r, t = triples[0]
        cands = set(store.filtered_candidates((h, r, None), t).tolist())
        assert t in cands
        for other in range(n):
            if other != t and (h, r, other) in set(triples):
                assert other not in cands
            elif (h, r, other) not in set(triples):
                assert other in cands


class TestStats:
    def test_self_loop_degree(self, tmp_path):
        train = write_split(tmp_path / "train.txt", [("x", "r", "x")])
        valid = write_split(tmp_path / "valid.txt", [])
        test = write_split(tmp_path / "test.txt", [])
        _, store = load_dataset(train, valid, test)
        stats = compute_stats(store)
        assert stats.avg_degree == 2.0
        assert stats.triples_per_entity == 1.0

    def test_bundled_counts_match_generator(self, bundled_store):
        stats = compute_stats(bundled_store)
        assert (stats.entities, stats.relations) == (135, 50)
        assert (stats.train, stats.valid, stats.test) == (5400, 675, 675)
        # brute-force recount over the raw files
        raw = sum(1 for p in dataset_paths("modular135")
                  for _ in open(p, encoding="utf-8"))
        assert raw == stats.train + stats.valid + stats.test

    def test_stats_json_is_one_line(self, bundled_store):
        blob = compute_stats(bundled_store).to_json()
        assert "\n" not in blob
        import json

        parsed = json.loads(blob)
        assert parsed["entities"] == 135

    def test_reference_deltas_logged_not_fatal(self, tmp_path):
        train = write_split(tmp_path / "train.txt", [("a", "r", "b")])
        valid = write_split(tmp_path / "valid.txt", [])
        test = write_split(tmp_path / "test.txt", [])
        _, store = load_dataset(train, valid, test)
        deltas = compare_reference(compute_stats(store), "umls")
        assert deltas["entities"] == (2, 135)

    @pytest.mark.parametrize("name", ["umls", "kinship", "countries"])
    def test_published_dataset_counts(self, name):
        if not has_dataset(name):
            pytest.skip(f"{name} files not present; run scripts/fetch_datasets.py")
        _, store = load_dataset(*dataset_paths(name))
        stats = compute_stats(store)
        ref = REFERENCE_STATS[name]
        assert stats.entities == ref["entities"]
        assert stats.relations == ref["relations"]
        assert (stats.train, stats.valid, stats.test) == (ref["train"], ref["valid"], ref["test"])
