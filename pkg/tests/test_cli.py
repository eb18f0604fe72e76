import json

import numpy as np
import pytest

from kgeaffine.cli import main
from kgeaffine.datasets import load_dataset
from kgeaffine.models import init_embeddings
from kgeaffine.trainer import TrainConfig, load_checkpoint

from conftest import BUNDLED, has_dataset


def write_lines(path, rows):
    path.write_text("".join(f"{h}\t{r}\t{t}\n" for h, r, t in rows), encoding="utf-8")
    return str(path)


@pytest.fixture
def line_world(tmp_path):
    """Tiny exactly-learnable dataset: i --next--> i+1 over 6 entities."""
    train = [(f"n{i}", "next", f"n{i+1}") for i in range(5)] * 4
    valid = [("n0", "next", "n1")]
    test = [("n1", "next", "n2"), ("n3", "next", "n4")]
    paths = {}
    for name, rows in (("train", train), ("valid", valid), ("test", test)):
        paths[name] = write_lines(tmp_path / f"{name}.txt", rows)
    return paths


def split_args(paths):
    return ["--train", paths["train"], "--valid", paths["valid"], "--test", paths["test"]]


def base_config(**over):
    cfg = {
        "model": "TransE", "entity_dim": 8, "p_norm": 2,
        "loss": "self_adversarial", "margin": 2.0, "negatives": 2,
        "batch_size": 4, "epochs": 60, "learning_rate": 0.1,
        "optimizer": "adagrad", "seed": 3,
    }
    cfg.update(over)
    return cfg


def write_config(tmp_path, **over):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(base_config(**over)), encoding="utf-8")
    return str(path)


class TestStats:
    def test_bundled_stats_json(self, capsys):
        if not has_dataset("modular135"):
            pytest.skip("bundled dataset missing")
        code = main(["stats",
                     "--train", str(BUNDLED / "train.txt"),
                     "--valid", str(BUNDLED / "valid.txt"),
                     "--test", str(BUNDLED / "test.txt")])
        assert code == 0
        out = json.loads(capsys.readouterr().out)
        assert out["entities"] == 135 and out["train"] == 5400

    def test_missing_file_exits_2(self, tmp_path, capsys):
        code = main(["stats", "--train", str(tmp_path / "none.txt"),
                     "--valid", str(tmp_path / "none.txt"),
                     "--test", str(tmp_path / "none.txt")])
        assert code == 2
        assert "error" in capsys.readouterr().err


class TestTrain:
    def test_zero_lr_checkpoint_equals_init(self, line_world, tmp_path, capsys):
        cfg_path = write_config(tmp_path, learning_rate=0.0, epochs=1, optimizer="sgd")
        out = tmp_path / "model.kgef"
        code = main(["train", *split_args(line_world), "--config", cfg_path, "--out", str(out)])
        assert code == 0
        _, store = load_dataset(line_world["train"], line_world["valid"], line_world["test"])
        ckpt = load_checkpoint(out, expected_digest=store.vocab.digest())
        cfg = TrainConfig.from_dict(json.loads(open(cfg_path).read()))
        init = init_embeddings(cfg.spec(), store.vocab, cfg.seed, dtype=np.float32)
        assert np.array_equal(ckpt.table.entities, init.entities)
        assert np.array_equal(ckpt.table.relations, init.relations)
        err = capsys.readouterr().err
        assert "epoch=0 loss=" in err

    def test_unknown_model_family_exits_2_naming_field(self, line_world, tmp_path, capsys):
        cfg_path = write_config(tmp_path, model="TransQ")
        code = main(["train", *split_args(line_world), "--config", cfg_path,
                     "--out", str(tmp_path / "x.kgef")])
        assert code == 2
        assert "model" in capsys.readouterr().err

    def test_flag_overrides_and_env_seed(self, line_world, tmp_path, monkeypatch, capsys):
        cfg_path = write_config(tmp_path, seed=1, epochs=2)
        out_a = tmp_path / "a.kgef"
        out_b = tmp_path / "b.kgef"
        out_c = tmp_path / "c.kgef"
        monkeypatch.setenv("KGE_SEED", "2")
        assert main(["train", *split_args(line_world), "--config", cfg_path, "--out", str(out_a)]) == 0
        monkeypatch.delenv("KGE_SEED")
        cfg2 = write_config(tmp_path, seed=2, epochs=2)
        assert main(["train", *split_args(line_world), "--config", cfg2, "--out", str(out_b)]) == 0
        # explicit flag beats the environment
        monkeypatch.setenv("KGE_SEED", "9")
        assert main(["train", *split_args(line_world), "--config", cfg_path,
                     "--seed", "2", "--out", str(out_c)]) == 0
        capsys.readouterr()
        assert out_a.read_bytes() == out_b.read_bytes() == out_c.read_bytes()


class TestEval:
    def trained(self, line_world, tmp_path, capsys):
        cfg_path = write_config(tmp_path)
        out = tmp_path / "model.kgef"
        assert main(["train", *split_args(line_world), "--config", cfg_path, "--out", str(out)]) == 0
        capsys.readouterr()
        return out

    def test_trained_model_beats_random_baseline(self, line_world, tmp_path, capsys):
        ckpt = self.trained(line_world, tmp_path, capsys)
        code = main(["eval", *split_args(line_world), "--ckpt", str(ckpt), "--threads", "1"])
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["mrr_filtered"] > 1.0 / 6.0
        assert report["queries"] == 4

    def test_digest_mismatch_exits_4(self, line_world, tmp_path, capsys):
        ckpt = self.trained(line_world, tmp_path, capsys)
        other = {k: write_lines(tmp_path / f"o_{k}.txt", [("a", "r", "b")]) for k in ("train", "valid", "test")}
        code = main(["eval", *split_args(other), "--ckpt", str(ckpt)])
        assert code == 4

    def test_per_query_csv_and_tie_policy(self, line_world, tmp_path, capsys):
        ckpt = self.trained(line_world, tmp_path, capsys)
        csv_path = tmp_path / "ranks.csv"
        code = main(["eval", *split_args(line_world), "--ckpt", str(ckpt),
                     "--tie-policy", "pessimistic", "--per-query", str(csv_path)])
        assert code == 0
        assert csv_path.read_text().startswith("query_head,query_rel,query_tail")

    def test_corrupt_checkpoint_exits_2(self, line_world, tmp_path, capsys):
        bad = tmp_path / "bad.kgef"
        bad.write_bytes(b"NOPE" + b"\x00" * 64)
        code = main(["eval", *split_args(line_world), "--ckpt", str(bad)])
        assert code == 2


class TestPredict:
    def trained(self, line_world, tmp_path, capsys):
        cfg_path = write_config(tmp_path)
        out = tmp_path / "model.kgef"
        assert main(["train", *split_args(line_world), "--config", cfg_path, "--out", str(out)]) == 0
        capsys.readouterr()
        return out

    def test_trained_tail_ranked_first(self, line_world, tmp_path, capsys):
        ckpt = self.trained(line_world, tmp_path, capsys)
        code = main(["predict", *split_args(line_world), "--ckpt", str(ckpt),
                     "--head", "n1", "--rel", "next", "--topk", "3"])
        assert code == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 3
        top_entity, top_score = lines[0].split("\t")
        assert top_entity == "n2"
        assert float(top_score) >= float(lines[1].split("\t")[1])

    def test_topk_larger_than_vocab_returns_all(self, line_world, tmp_path, capsys):
        ckpt = self.trained(line_world, tmp_path, capsys)
        code = main(["predict", *split_args(line_world), "--ckpt", str(ckpt),
                     "--head", "n1", "--rel", "next", "--topk", "100"])
        assert code == 0
        assert len(capsys.readouterr().out.strip().splitlines()) == 6

    def test_filter_removes_known_true_tail(self, line_world, tmp_path, capsys):
        ckpt = self.trained(line_world, tmp_path, capsys)
        code = main(["predict", *split_args(line_world), "--ckpt", str(ckpt),
                     "--head", "n1", "--rel", "next", "--topk", "100", "--filter"])
        assert code == 0
        out = capsys.readouterr().out
        entities = [line.split("\t")[0] for line in out.strip().splitlines()]
        assert "n2" not in entities  # (n1, next, n2) is known true
        assert len(entities) == 5

    def test_unknown_name_exits_5_with_suggestions(self, line_world, tmp_path, capsys):
        ckpt = self.trained(line_world, tmp_path, capsys)
        code = main(["predict", *split_args(line_world), "--ckpt", str(ckpt),
                     "--head", "n11", "--rel", "next"])
        assert code == 5
        assert "n1" in capsys.readouterr().err


class TestGradcheck:
    def test_single_family_report(self, capsys):
        code = main(["gradcheck", "--families", "TransE,DistMult", "--probes", "5"])
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["all_passed"]
        assert set(report["families"]) == {"TransE", "DistMult"}

    def test_unknown_family_exits_2(self, capsys):
        assert main(["gradcheck", "--families", "Nope"]) == 2


class TestRandomModelBaseline:
    def test_random_embeddings_mrr_near_uniform_expectation(self, tmp_path, capsys):
        rng = np.random.default_rng(0)
        n = 100
        triples = {(int(h), 0, int(t)) for h, t in rng.integers(0, n, (60, 2)) if h != t}
        triples = sorted(triples)
        names = [(f"e{h}", "r", f"e{t}") for h, r, t in triples]
        paths = {
            "train": write_lines(tmp_path / "train.txt", names[:10]),
            "valid": write_lines(tmp_path / "valid.txt", names[10:12]),
            "test": write_lines(tmp_path / "test.txt", names[12:]),
        }
        cfg = write_config(tmp_path, epochs=1, learning_rate=0.0, optimizer="sgd",
                           entity_dim=16, batch_size=4)
        out = tmp_path / "rand.kgef"
        assert main(["train", *split_args(paths), "--config", cfg, "--out", str(out)]) == 0
        capsys.readouterr()
        assert main(["eval", *split_args(paths), "--ckpt", str(out)]) == 0
        report = json.loads(capsys.readouterr().out)
        # analytic mean/σ of 1/rank when ranks are uniform on 1..n_entities
        _, store = load_dataset(paths["train"], paths["valid"], paths["test"])
        n_e = store.vocab.n_entities
        inv = 1.0 / np.arange(1, n_e + 1)
        mu, sigma = inv.mean(), inv.std()
        m = report["queries"]
        assert abs(report["mrr_raw"] - mu) <= 3.0 * sigma / np.sqrt(m)
