#!/usr/bin/env python3
"""Generate the bundled modular135 benchmark (deterministic).

135 entities on a ring; 48 cyclic-shift relations (i -> i+k mod 135),
one mirror relation (i -> -i mod 135), and one many-to-one hub relation
(i -> i mod 5). 6,750 facts, shuffled with a fixed seed and split
5,400 / 675 / 675. The shift and mirror relations are exactly
representable by rotation-style models, so a correct trainer must reach
high filtered MRR; the hub relation exercises the filtered ranking path
with genuinely multi-valued queries.
"""

import argparse
from pathlib import Path

import numpy as np

N_ENTITIES = 135
N_SHIFTS = 48
SEED = 7
SPLITS = {"train": 5400, "valid": 675, "test": 675}


def facts():
    out = []
    for k in range(1, N_SHIFTS + 1):
        rel = f"shift_{k:02d}"
        for i in range(N_ENTITIES):
            out.append((f"e{i:03d}", rel, f"e{(i + k) % N_ENTITIES:03d}"))
    for i in range(N_ENTITIES):
        out.append((f"e{i:03d}", "mirror", f"e{(N_ENTITIES - i) % N_ENTITIES:03d}"))
    for i in range(N_ENTITIES):
        out.append((f"e{i:03d}", "hub", f"e{i % 5:03d}"))
    return out


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data" / "modular135"))
    args = parser.parse_args()

    all_facts = facts()
    assert len(all_facts) == sum(SPLITS.values())
    order = np.random.default_rng(SEED).permutation(len(all_facts))
    shuffled = [all_facts[i] for i in order]

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    offset = 0
    for split, size in SPLITS.items():
        with open(out_dir / f"{split}.txt", "w", encoding="utf-8") as fh:
            for h, r, t in shuffled[offset: offset + size]:
                fh.write(f"{h}\t{r}\t{t}\n")
        offset += size
    print(f"wrote {sum(SPLITS.values())} facts to {out_dir}")


if __name__ == "__main__":
    main()
