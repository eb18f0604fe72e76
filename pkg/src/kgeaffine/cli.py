"""Command-line interface.

Machine-readable results go to stdout as JSON (or TSV for predict);
logs and warnings go to stderr. Exit codes: 0 ok, 2 I/O or input
problem (missing files, parse errors, bad config, corrupt checkpoint),
3 training divergence, 4 vocabulary digest mismatch, 5 unknown
entity/relation name. The KGE_SEED environment variable overrides the
config seed; explicit flags override both.
"""

import argparse
import difflib
import json
import logging
import os
import sys

import numpy as np

from . import __version__, evaluation, models, trainer
from .datasets import compare_reference, compute_stats, load_dataset
from .errors import (
    CheckpointError,
    DivergenceError,
    EmptySplitError,
    KgeError,
    SchemaError,
    TripleParseError,
    UnknownNameError,
    VocabDigestError,
)

log = logging.getLogger("kgeaffine")

EXIT_OK = 0
EXIT_IO = 2
EXIT_DIVERGENCE = 3
EXIT_DIGEST = 4
EXIT_UNKNOWN_NAME = 5


def _add_split_args(p):
    p.add_argument("--train", required=True, help="train split (tab-separated triples)")
    p.add_argument("--valid", required=True, help="validation split")
    p.add_argument("--test", required=True, help="test split")


def _load_store(args):
    return load_dataset(args.train, args.valid, args.test)


def cmd_stats(args):
    _, store = _load_store(args)
    stats = compute_stats(store)
    if args.reference:
        try:
            deltas = compare_reference(stats, args.reference)
        except KeyError:
            log.warning("no reference figures for dataset %r", args.reference)
        else:
            if not deltas:
                log.info("stats match the published figures for %s", args.reference)
    print(stats.to_json())
    return EXIT_OK


def _read_config(path):
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise SchemaError(["config must be a flat JSON object"])
    return raw


def cmd_train(args):
    raw = _read_config(args.config)
    if "KGE_SEED" in os.environ:
        raw["seed"] = int(os.environ["KGE_SEED"])
    for flag in ("seed", "epochs", "batch_size", "learning_rate"):
        value = getattr(args, flag)
        if value is not None:
            raw[flag] = value
    config = trainer.TrainConfig.from_dict(raw)
    _, store = _load_store(args)
    ckpt = trainer.train(config, store, progress=lambda line: print(line, file=sys.stderr))
    trainer.save_checkpoint(ckpt, args.out)
    log.info("wrote checkpoint %s (epoch %d)", args.out, ckpt.epoch)
    return EXIT_OK


def cmd_eval(args):
    _, store = _load_store(args)
    ckpt = trainer.load_checkpoint(args.ckpt, expected_digest=store.vocab.digest())
    report, results = evaluation.evaluate(
        ckpt.spec, ckpt.table, store.test, store,
        tie_policy=args.tie_policy, threads=args.threads, collect=True,
    )
    if args.per_query:
        evaluation.write_per_query_csv(results, args.per_query)
        log.info("wrote per-query ranks to %s", args.per_query)
    print(report.to_json())
    return EXIT_OK


def cmd_gradcheck(args):
    if args.families == "all":
        fams = models.FAMILIES
    else:
        fams = tuple(f.strip() for f in args.families.split(","))
        unknown = [f for f in fams if f not in models.FAMILIES]
        if unknown:
            raise SchemaError([f"unknown family {f!r}" for f in unknown])
    report = {"tol": args.tol, "families": {}, "losses": {}}
    for fam in fams:
        spec = trainer.default_check_spec(fam)
        report["families"][fam] = trainer.gradient_check(
            spec, n_probes=args.probes, tol=args.tol, seed=args.seed
        )
    if args.losses:
        from .objectives import LOSS_KINDS

        for kind in LOSS_KINDS:
            report["losses"][kind] = trainer.check_loss_gradients(
                kind, n_probes=args.probes, tol=args.tol, seed=args.seed
            )
    checks = list(report["families"].values()) + list(report["losses"].values())
    report["all_passed"] = all(c["passed"] for c in checks)
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


def _resolve(name, ids):
    if name in ids:
        return ids[name]
    raise UnknownNameError(name, difflib.get_close_matches(name, ids.keys(), n=3))


def cmd_predict(args):
    vocab, store = _load_store(args)
    ckpt = trainer.load_checkpoint(args.ckpt, expected_digest=vocab.digest())
    h = _resolve(args.head, vocab.entity_ids)
    r = _resolve(args.rel, vocab.relation_ids)
    scores = models.score_candidates(ckpt.spec, ckpt.table, h, r, "tail")
    order = np.argsort(-scores, kind="stable")
    known = store.true_tails(h, r) if args.filter else set()
    printed = 0
    for t in order:
        if printed >= args.topk:
            break
        if int(t) in known:
            continue
        print(f"{vocab.entity_names[int(t)]}\t{scores[int(t)]:.6f}")
        printed += 1
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="kgeaffine",
        description="Knowledge-graph embedding training and link-prediction evaluation.",
    )
    parser.add_argument("--version", action="version", version=f"kgeaffine {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="dataset statistics as one-line JSON")
    _add_split_args(p)
    p.add_argument("--reference", help="compare against published figures (e.g. umls, kinship)")
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("train", help="train a model from a flat JSON config")
    _add_split_args(p)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="filtered/raw ranking metrics of a checkpoint")
    _add_split_args(p)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--tie-policy", dest="tie_policy", default="mean",
                   choices=evaluation.TIE_POLICIES)
    p.add_argument("--per-query", dest="per_query", help="also write per-query ranks CSV")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference check of analytic gradients")
    p.add_argument("--families", default="all", help="comma list or 'all'")
    p.add_argument("--probes", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--losses", action="store_true", help="also check the loss gradients")
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("predict", help="top-K tail completions for (head, relation, ?)")
    _add_split_args(p)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--head", required=True)
    p.add_argument("--rel", required=True)
    p.add_argument("--topk", type=int, default=10)
    p.add_argument("--filter", action="store_true",
                   help="drop tails already known to be true")
    p.set_defaults(fn=cmd_predict)
    return parser


def main(argv=None):
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except VocabDigestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIGEST
    except UnknownNameError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNKNOWN_NAME
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (OSError, json.JSONDecodeError, TripleParseError, EmptySplitError,
            SchemaError, CheckpointError, KgeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
