#!/usr/bin/env python3
"""Compare the compiled kernels against the numpy fallback.

Times the four hot kernels at training-realistic shapes and an end-to-end
training epoch with each backend. Run after building the extension:

    python benchmarks/bench_kernels.py
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from kgeaffine.kernels import _pykernels  # noqa: E402

try:
    from kgeaffine.kernels import _ckernels
except ImportError:
    _ckernels = None


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(repeats):
    rng = np.random.default_rng(0)
    n, d, m = 20000, 128, 8192
    rows = rng.integers(0, n, m)
    rows_unique = np.unique(rows)
    grads = rng.standard_normal((m, d)).astype(np.float32)
    grads_unique = rng.standard_normal((len(rows_unique), d)).astype(np.float32)
    scores = rng.standard_normal(n).astype(np.float32)
    mask = rng.integers(0, 2, n).astype(np.uint8)
    target = float(scores[123])

    cases = {
        "scatter_add_rows (8k x 128 into 20k)": lambda mod: mod.scatter_add_rows(
            np.zeros((n, d), dtype=np.float32), rows, grads),
        "sgd_update": lambda mod: mod.sgd_update(
            np.zeros((n, d), dtype=np.float32), rows_unique, grads_unique, 0.1),
        "adagrad_update": lambda mod: mod.adagrad_update(
            np.zeros((n, d), dtype=np.float32), np.zeros((n, d), dtype=np.float32),
            rows_unique, grads_unique, 0.1, 1e-10),
        "rank_counts (20k candidates)": lambda mod: mod.rank_counts(scores, target, mask),
    }
    print(f"{'kernel':42s} {'numpy':>10s} {'cython':>10s} {'speedup':>8s}")
    for name, fn in cases.items():
        t_py = timeit(lambda: fn(_pykernels), repeats)
        if _ckernels is None:
            print(f"{name:42s} {t_py * 1e3:9.2f}ms {'-':>10s} {'-':>8s}")
            continue
        t_cy = timeit(lambda: fn(_ckernels), repeats)
        print(f"{name:42s} {t_py * 1e3:9.2f}ms {t_cy * 1e3:9.2f}ms {t_py / t_cy:7.1f}x")


def bench_epoch(repeats):
    from kgeaffine import kernels
    from kgeaffine.datasets import load_dataset
    from kgeaffine.trainer import TrainConfig, train

    data = Path(__file__).resolve().parent.parent / "data" / "modular135"
    if not data.exists():
        print("modular135 not generated; skipping the epoch benchmark")
        return
    _, store = load_dataset(data / "train.txt", data / "valid.txt", data / "test.txt")
    cfg = TrainConfig(model="RotatE", entity_dim=128, loss="self_adversarial",
                      margin=6.0, negatives=16, batch_size=512, epochs=2,
                      learning_rate=0.5, optimizer="adagrad", seed=0)
    results = {}
    backends = [("numpy", _pykernels)] + ([("cython", _ckernels)] if _ckernels else [])
    saved = (kernels.scatter_add_rows, kernels.sgd_update, kernels.adagrad_update)
    try:
        for name, mod in backends:
            kernels.scatter_add_rows = mod.scatter_add_rows
            kernels.sgd_update = mod.sgd_update
            kernels.adagrad_update = mod.adagrad_update
            results[name] = timeit(lambda: train(cfg, store), max(1, repeats // 3))
    finally:
        kernels.scatter_add_rows, kernels.sgd_update, kernels.adagrad_update = saved
    line = " vs ".join(f"{k}: {v:.2f}s" for k, v in results.items())
    print(f"\n2 RotatE epochs on modular135 -> {line}")
    if len(results) == 2:
        print(f"end-to-end speedup: {results['numpy'] / results['cython']:.2f}x")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    if _ckernels is None:
        print("compiled kernels unavailable; showing numpy timings only\n")
    bench_kernels(args.repeats)
    bench_epoch(args.repeats)


if __name__ == "__main__":
    main()
