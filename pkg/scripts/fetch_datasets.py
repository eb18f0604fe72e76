#!/usr/bin/env python3
"""Download the standard UMLS / Kinship / Countries benchmark splits.

Requires network access. Files land in data/<name>/{train,valid,test}.txt
and are checked against the published entity/relation/split counts; a
mismatch is reported but the files are kept (the files on disk win).
"""

import argparse
import sys
import urllib.error
import urllib.request
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from kgeaffine.datasets import REFERENCE_STATS, compute_stats, load_dataset  # noqa: E402

MIRRORS = {
    "umls": [
        "https://raw.githubusercontent.com/ZhenfengLei/KGDatasets/master/UMLS",
        "https://raw.githubusercontent.com/villmow/datasets_knowledge_embedding/master/UMLS",
    ],
    "kinship": [
        "https://raw.githubusercontent.com/ZhenfengLei/KGDatasets/master/Kinship",
        "https://raw.githubusercontent.com/villmow/datasets_knowledge_embedding/master/KINSHIP",
    ],
    "countries": [
        "https://raw.githubusercontent.com/ZhenfengLei/KGDatasets/master/Countries/Countries_S1",
        "https://raw.githubusercontent.com/villmow/datasets_knowledge_embedding/master/countries_S1",
    ],
}

SPLIT_FILES = ("train.txt", "valid.txt", "test.txt")


def fetch(name, out_root):
    out_dir = out_root / name
    out_dir.mkdir(parents=True, exist_ok=True)
    last_error = None
    for base in MIRRORS[name]:
        try:
            for fname in SPLIT_FILES:
                with urllib.request.urlopen(f"{base}/{fname}", timeout=30) as resp:
                    (out_dir / fname).write_bytes(resp.read())
        except (urllib.error.URLError, OSError) as exc:
            last_error = exc
            continue
        return out_dir
    raise RuntimeError(f"could not fetch {name}: {last_error}")


def verify(name, out_dir):
    _, store = load_dataset(*(out_dir / f for f in SPLIT_FILES))
    stats = compute_stats(store)
    ref = REFERENCE_STATS[name]
    mismatches = {k: (getattr(stats, k), v) for k, v in ref.items() if getattr(stats, k) != v}
    if mismatches:
        print(f"WARNING {name}: stats differ from the published figures: {mismatches}")
    else:
        print(f"{name}: ok ({stats.to_json()})")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("names", nargs="*", default=list(MIRRORS), help="datasets to fetch")
    parser.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data"))
    args = parser.parse_args()
    out_root = Path(args.out)
    for name in args.names or list(MIRRORS):
        out_dir = fetch(name, out_root)
        verify(name, out_dir)


if __name__ == "__main__":
    main()
