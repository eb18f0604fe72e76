"""Filtered link-prediction ranking and aggregate metrics.

For each test triple both directions are queried: predict the tail given
(head, relation) and the head given (relation, tail). The raw rank
counts every entity as a candidate; the filtered rank drops candidates
that would form a different known-true triple, never the target itself.
Ties are resolved by policy: "mean" (default) adds half the tied
competitors, "pessimistic" all of them, "optimistic" none.
"""

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ParameterError
from .models import score_candidates

TIE_POLICIES = ("mean", "optimistic", "pessimistic")
HITS_KS = (1, 3, 10)


@dataclass
class RankResult:
    head: int
    rel: int
    tail: int
    direction: str        # "head" or "tail": which slot was ranked
    raw_rank: float
    filtered_rank: float


@dataclass
class MetricsReport:
    mr_raw: float
    mrr_raw: float
    hits1_raw: float
    hits3_raw: float
    hits10_raw: float
    mr_filtered: float
    mrr_filtered: float
    hits1_filtered: float
    hits3_filtered: float
    hits10_filtered: float
    queries: int

    def to_json(self):
        return json.dumps({k: round(v, 6) if isinstance(v, float) else v
                           for k, v in self.__dict__.items()}, sort_keys=True)


def rank_from_scores(scores, target_id, mask, tie_policy="mean"):
    """Rank of the target among the masked candidates.

    rank = 1 + |{candidates scoring strictly higher}| + tie adjustment,
    where ties counts the other candidates with exactly equal score.
    """
    if tie_policy not in TIE_POLICIES:
        raise ParameterError(f"unknown tie policy {tie_policy!r}")
    if not mask.any():
        raise ParameterError("empty candidate set")
    if not mask[target_id]:
        raise ParameterError("target is not among the candidates")
    target_score = float(scores[target_id])
    greater, ties = kernels.rank_counts(scores, target_score, mask)
    others = ties - 1  # the target ties with itself
    if tie_policy == "mean":
        return 1.0 + greater + others / 2.0
    if tie_policy == "pessimistic":
        return 1.0 + greater + others
    return 1.0 + greater


def rank_query(spec, table, query, target_id, store, tie_policy="mean"):
    """Raw and filtered rank for one query.

    ``query`` is (head, rel, None) to rank tails or (None, rel, tail) to
    rank heads; ``target_id`` is the ground-truth entity.
    """
    h, r, t = query
    if t is None:
        direction = "tail"
        scores = score_candidates(spec, table, h, r, "tail")
        triple = (h, r, target_id)
    elif h is None:
        direction = "head"
        scores = score_candidates(spec, table, t, r, "head")
        triple = (target_id, r, t)
    else:
        raise ParameterError("query must leave exactly one slot as None")
    scores = np.ascontiguousarray(scores)
    all_mask = np.ones(len(scores), dtype=np.uint8)
    raw = rank_from_scores(scores, target_id, all_mask, tie_policy)
    filt_mask = store.candidate_mask(query, target_id)
    filtered = rank_from_scores(scores, target_id, filt_mask, tie_policy)
    return RankResult(triple[0], triple[1], triple[2], direction, raw, filtered)


def metrics_from_ranks(ranks, ks=HITS_KS):
    """MR, MRR, and Hits@k for a rank list (double-precision sums)."""
    ranks = np.asarray(ranks, dtype=np.float64)
    out = {
        "mr": float(ranks.mean()),
        "mrr": float((1.0 / ranks).mean()),
    }
    for k in ks:
        out[f"hits{k}"] = float((ranks <= k).mean())
    return out


def evaluate(spec, table, triples, store, tie_policy="mean", threads=1, collect=False):
    """Both-direction filtered evaluation of a triple split."""
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)

    def one(triple):
        h, r, t = (int(x) for x in triple)
        return (
            rank_query(spec, table, (h, r, None), t, store, tie_policy),
            rank_query(spec, table, (None, r, t), h, store, tie_policy),
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            pairs = list(pool.map(one, triples))
    else:
        pairs = [one(tr) for tr in triples]
    results = [q for pair in pairs for q in pair]

    raw = metrics_from_ranks([q.raw_rank for q in results])
    filt = metrics_from_ranks([q.filtered_rank for q in results])
    report = MetricsReport(
        mr_raw=raw["mr"], mrr_raw=raw["mrr"],
        hits1_raw=raw["hits1"], hits3_raw=raw["hits3"], hits10_raw=raw["hits10"],
        mr_filtered=filt["mr"], mrr_filtered=filt["mrr"],
        hits1_filtered=filt["hits1"], hits3_filtered=filt["hits3"], hits10_filtered=filt["hits10"],
        queries=len(results),
    )
    return (report, results) if collect else report


def write_per_query_csv(results, path):
    """Per-query CSV: query ids, direction, raw and filtered rank."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["query_head", "query_rel", "query_tail", "direction", "raw_rank", "filtered_rank"])
        for q in results:
            writer.writerow([q.head, q.rel, q.tail, q.direction, q.raw_rank, q.filtered_rank])
