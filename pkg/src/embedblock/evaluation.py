"""Blocking quality and efficiency metrics.

The reduction ratio keeps the ordered-pair denominator ``|E|(|E|-1)``
while ``N_b`` counts unordered pairs, so reported RR values are directly
comparable with figures computed the same way.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass
from typing import Iterable, Mapping, Sequence


class UndefinedMetricError(ValueError):
    """A ratio metric whose denominator is zero."""


def _pair_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


def reduction_ratio(n_b: int, dataset_size: int) -> float:
    """``1 - n_b / (|E| (|E| - 1))``, clamped at 0 with a warning."""
    if dataset_size < 2:
        raise ValueError("dataset_size must be at least 2")
    if n_b < 0:
        raise ValueError("n_b must be non-negative")
    total = dataset_size * (dataset_size - 1)
    if n_b > total:
        warnings.warn(f"n_b={n_b} exceeds |E|(|E|-1)={total}; reduction ratio clamped to 0")
        return 0.0
    return 1.0 - n_b / total


def pair_completeness(n_m: int, m: int) -> float:
    if m <= 0:
        raise UndefinedMetricError("pair completeness needs at least one true match")
    if not 0 <= n_m <= m:
        raise ValueError(f"n_m must lie in [0, {m}], got {n_m}")
    return n_m / m


def precision(tp: int, fp: int) -> float:
    if tp < 0 or fp < 0:
        raise ValueError("counts must be non-negative")
    if tp + fp == 0:
        raise UndefinedMetricError("precision undefined with no reported candidates")
    return tp / (tp + fp)


@dataclass
class DedupEvaluation:
    n_b: int
    n_m: int
    m: int
    rr: float
    pc: float
    n_candidates: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate_dedup(
    n_b: int,
    candidates: Iterable,
    truth: Sequence[tuple[str, str]],
    dataset_size: int,
) -> DedupEvaluation:
    """Score a dedup run.

    Parameters
    ----------
    n_b : int
        Unordered pairs compared inside blocks, before the threshold.
    candidates : iterable
        ``CandidatePair`` objects or ``(left_id, right_id)`` tuples.
    truth : sequence of (id, id)
        True duplicate pairs, in either orientation.
    dataset_size : int
        ``|E|``.
    """
    truth_keys = {_pair_key(a, b) for a, b in truth}
    found = set()
    for c in candidates:
        a, b = (c.left, c.right) if hasattr(c, "left") else (c[0], c[1])
        found.add(_pair_key(a, b))
    n_m = len(found & truth_keys)
    return DedupEvaluation(
        n_b=n_b,
        n_m=n_m,
        m=len(truth_keys),
        rr=reduction_ratio(n_b, dataset_size),
        pc=pair_completeness(n_m, len(truth_keys)),
        n_candidates=len(found),
    )


@dataclass
class QueryEvaluation:
    tp: int
    fp: int
    precision: float | None
    processed: int
    elapsed: float
    tp_per_second: float
    truth_pairs: int
    recall: float | None
    mean_query_seconds: float | None
    mean_embed_seconds: float | None

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate_query_run(
    report,
    truth: Sequence[tuple[str, str]],
    known_queries: Iterable[str] | None = None,
) -> QueryEvaluation:
    """Score a query stream against ``(query_id, reference_id)`` truth pairs.

    A candidate is a true positive when its pair is in ``truth``; every
    other reported candidate is a false positive. Queries in the report must
    appear in ``known_queries`` (defaults to the truth's query ids).
    """
    truth_set = set(truth)
    known = set(known_queries) if known_queries is not None else {q for q, _ in truth}
    tp = fp = 0
    for result in report.results:
        if result.query_id not in known:
            raise KeyError(f"query {result.query_id!r} is not part of the benchmark")
        for c in result.candidates:
            if (result.query_id, c.reference_id) in truth_set:
                tp += 1
            else:
                fp += 1
    processed = report.processed
    elapsed = report.elapsed
    prec = precision(tp, fp) if tp + fp else None
    mean_q = sum(r.total_seconds for r in report.results) / processed if processed else None
    mean_e = sum(r.timings["distance"] + r.timings["embed"] for r in report.results) / processed if processed else None
    return QueryEvaluation(
        tp=tp,
        fp=fp,
        precision=prec,
        processed=processed,
        elapsed=elapsed,
        tp_per_second=tp / elapsed if elapsed > 0 else 0.0,
        truth_pairs=len(truth_set),
        recall=tp / len(truth_set) if truth_set else None,
        mean_query_seconds=mean_q,
        mean_embed_seconds=mean_e,
    )


def sweep_rows(evaluations: Mapping[int, DedupEvaluation]) -> list[dict]:
    """One flat row per block size, ascending, for CSV export."""
    return [{"block_size": b, **evaluations[b].to_dict()} for b in sorted(evaluations)]
