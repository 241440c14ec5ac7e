"""Blocking pipelines on top of an embedding.

Deduplication turns every embedded point into a block of its ``B`` nearest
neighbours and filters the resulting pairs by edit distance. Query matching
places each incoming record against the landmarks only, then searches the
reference tree for its block.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .embedding import Embedding, OosConfig, embed_out_of_sample
from .evaluation import DedupEvaluation, evaluate_dedup
from .kdtree import DEFAULT_LEAF_CAPACITY, KdTree, NeighbourList
from .records import Record, RecordSet, make_blocking_value
from .strdist import EncodedStrings, levenshtein_pairs, levenshtein_to_many

DEFAULT_THETA = 2


@dataclass(frozen=True)
class Block:
    """``anchor`` is a point index for dedup blocks and ``-1`` for query blocks."""

    anchor: int
    members: NeighbourList

    def __len__(self) -> int:
        return len(self.members)


@dataclass(frozen=True, order=True)
class CandidatePair:
    left: str
    right: str
    edit_distance: int


@dataclass(frozen=True)
class QueryCandidate:
    reference_id: str
    reference_index: int
    edit_distance: int


# -- deduplication ------------------------------------------------------------


def _points(source) -> np.ndarray:
    return source.points if isinstance(source, Embedding) else np.asarray(source, dtype=np.float64)


def dedup_neighbours(source, B: int, tree: KdTree | None = None) -> tuple[np.ndarray, np.ndarray]:
    """``(N, B')`` neighbour indices and distances, anchor excluded, ``B' = min(B, N-1)``."""
    if B < 1:
        raise ValueError("block size must be at least 1")
    tree = tree or KdTree(_points(source))
    return tree.knn_all(B, exclude_self=True)


def dedup_index(source, B: int, leaf_capacity: int = DEFAULT_LEAF_CAPACITY) -> list[Block]:
    """One block per point holding its ``B`` nearest other points."""
    tree = KdTree(_points(source), leaf_capacity)
    idx, dist = dedup_neighbours(source, B, tree)
    return [Block(a, NeighbourList(idx[a], dist[a])) for a in range(idx.shape[0])]


def _unique_pairs(anchors: np.ndarray, members: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    lo = np.minimum(anchors, members)
    hi = np.maximum(anchors, members)
    keys = np.unique(lo * n + hi)
    return keys // n, keys % n


def candidate_pairs(
    blocks: Sequence[Block] | np.ndarray,
    values: Sequence[str] | EncodedStrings,
    record_ids: Sequence[str],
    theta_m: int = DEFAULT_THETA,
) -> tuple[list[CandidatePair], int]:
    """Threshold the within-block pairs by edit distance.

    Each unordered ``(anchor, member)`` pair is compared once, however many
    blocks it appears in. Returns the surviving pairs, sorted, and ``N_b``,
    the number of distinct pairs compared.

    ``blocks`` may also be an ``(N, B)`` neighbour index array whose row
    ``a`` is the block of point ``a``.
    """
    if theta_m < 0:
        raise ValueError("theta_m must be non-negative")
    n = len(record_ids)
    if isinstance(blocks, np.ndarray):
        anchors = np.repeat(np.arange(blocks.shape[0], dtype=np.int64), blocks.shape[1])
        members = blocks.reshape(-1).astype(np.int64)
    else:
        anchors = np.concatenate([np.full(len(b), b.anchor, dtype=np.int64) for b in blocks] or [np.zeros(0, np.int64)])
        members = np.concatenate([b.members.indices for b in blocks] or [np.zeros(0, np.int64)]).astype(np.int64)
    left, right = _unique_pairs(anchors, members, n)
    dist = levenshtein_pairs(values, left, right)
    keep = np.flatnonzero(dist <= theta_m)
    pairs = []
    for t in keep:
        a, b = record_ids[left[t]], record_ids[right[t]]
        if b < a:
            a, b = b, a
        pairs.append(CandidatePair(a, b, int(dist[t])))
    pairs.sort()
    return pairs, int(left.shape[0])


def run_dedup(
    embedding: Embedding | np.ndarray,
    records: RecordSet,
    B: int,
    theta_m: int = DEFAULT_THETA,
    truth: Sequence[tuple[str, str]] | None = None,
) -> tuple[list[Block], list[CandidatePair], int, DedupEvaluation | None]:
    """Blocks, candidates, ``N_b`` and (with ``truth``) the evaluation for one block size."""
    points = _points(embedding)
    if points.shape[0] != len(records):
        raise ValueError("embedding and record set differ in size")
    blocks = dedup_index(points, B)
    pairs, n_b = candidate_pairs(blocks, records.blocking_values(), records.ids, theta_m)
    ev = evaluate_dedup(n_b, pairs, truth, len(records)) if truth else None
    return blocks, pairs, n_b, ev


def sweep_block_sizes(
    embedding: Embedding | np.ndarray,
    records: RecordSet,
    sizes: Iterable[int],
    truth: Sequence[tuple[str, str]],
    theta_m: int = DEFAULT_THETA,
) -> dict[int, DedupEvaluation]:
    """Evaluate several block sizes from a single k-NN pass at the largest size.

    Neighbour lists are ordered, so the block for ``B`` is the first ``B``
    columns of the block for any larger size.
    """
    sizes = sorted(set(int(s) for s in sizes))
    if not sizes or sizes[0] < 1:
        raise ValueError("block sizes must be positive")
    points = _points(embedding)
    idx, _ = dedup_neighbours(points, sizes[-1])
    enc = EncodedStrings(records.blocking_values())
    out = {}
    for b in sizes:
        pairs, n_b = candidate_pairs(idx[:, :b], enc, records.ids, theta_m)
        out[b] = evaluate_dedup(n_b, pairs, truth, len(records))
    return out


# -- query matching -----------------------------------------------------------


@dataclass
class QueryResult:
    query_id: str
    blocking_value: str
    block: Block
    candidates: list[QueryCandidate]
    point: np.ndarray
    timings: dict[str, float]
    landmark_distances: int
    filter_distances: int
    knn_searches: int = 1

    @property
    def total_seconds(self) -> float:
        return sum(self.timings.values())

    def to_dict(self, reference_ids: Sequence[str] | None = None) -> dict:
        members = self.block.members
        ids = [reference_ids[i] for i in members.indices] if reference_ids is not None else None
        return {
            "query_id": self.query_id,
            "blocking_value": self.blocking_value,
            "block": {
                "indices": members.indices.tolist(),
                "record_ids": ids,
                "distances": members.distances.tolist(),
            },
            "candidates": [
                {"reference_id": c.reference_id, "edit_distance": c.edit_distance} for c in self.candidates
            ],
            "landmark_distances": self.landmark_distances,
            "filter_distances": self.filter_distances,
            "timings": self.timings,
        }


@dataclass
class StreamReport:
    processed: int
    results: list[QueryResult]
    elapsed: float
    budget: float
    total_queries: int = 0

    def summary(self) -> dict:
        n_cand = sum(len(r.candidates) for r in self.results)
        return {
            "processed": self.processed,
            "total_queries": self.total_queries,
            "candidates": n_cand,
            "elapsed": self.elapsed,
            "budget": self.budget,
        }


class QueryEngine:
    """Read-only matcher over an embedded reference set.

    Holds the reference Kd-tree and the landmark strings; nothing mutates
    after construction, so :meth:`process` may be called from many threads.
    """

    def __init__(
        self,
        embedding: Embedding,
        reference: RecordSet,
        k: int = 150,
        theta_m: int = DEFAULT_THETA,
        oos_config: OosConfig | None = None,
        leaf_capacity: int = DEFAULT_LEAF_CAPACITY,
    ):
        if embedding.points.shape[0] != len(reference):
            raise ValueError("embedding and reference set differ in size")
        if k < 1:
            raise ValueError("k must be at least 1")
        if theta_m < 0:
            raise ValueError("theta_m must be non-negative")
        self.embedding = embedding
        self.reference = reference
        self.reference_ids = reference.ids
        self.k = k
        self.theta_m = theta_m
        self.oos_config = oos_config or embedding.oos_config
        self.tree = KdTree(embedding.points, leaf_capacity)
        self.landmark_points = np.ascontiguousarray(embedding.landmark_points)
        self.landmarks = EncodedStrings(embedding.landmark_values)
        self.reference_values = EncodedStrings(reference.blocking_values())

    @property
    def n_landmarks(self) -> int:
        return len(self.landmarks)

    def process(self, query: Record) -> QueryResult:
        clock = time.perf_counter
        t0 = clock()
        value = make_blocking_value(query)
        deltas = levenshtein_to_many(value, self.landmarks)
        t1 = clock()
        y = embed_out_of_sample(self.landmark_points, deltas, self.oos_config, key=value)
        t2 = clock()
        members = self.tree.knn(y, self.k)
        t3 = clock()
        dist = levenshtein_to_many(value, self.reference_values, members.indices)
        keep = np.flatnonzero(dist <= self.theta_m)
        candidates = [
            QueryCandidate(self.reference_ids[members.indices[t]], int(members.indices[t]), int(dist[t]))
            for t in keep
        ]
        t4 = clock()
        return QueryResult(
            query_id=query.record_id,
            blocking_value=value,
            block=Block(-1, members),
            candidates=candidates,
            point=y,
            timings={"distance": t1 - t0, "embed": t2 - t1, "search": t3 - t2, "filter": t4 - t3},
            landmark_distances=int(deltas.shape[0]),
            filter_distances=int(dist.shape[0]),
        )


def process_query(engine: QueryEngine, query: Record) -> QueryResult:
    return engine.process(query)


def run_query_stream(engine: QueryEngine, queries: Iterable[Record], budget_seconds: float) -> StreamReport:
    """Process queries in order until the stream ends or the budget is spent.

    The budget is checked before each query, so the run may overshoot by at
    most one query.
    """
    if budget_seconds <= 0:
        raise ValueError("budget must be positive")
    queries = list(queries)
    results = []
    start = time.perf_counter()
    for q in queries:
        if time.perf_counter() - start >= budget_seconds:
            break
        results.append(engine.process(q))
    elapsed = time.perf_counter() - start
    return StreamReport(len(results), results, elapsed, budget_seconds, len(queries))


# -- JSON-lines output ----------------------------------------------------------


def block_to_dict(block: Block, record_ids: Sequence[str]) -> dict:
    m = block.members
    return {
        "anchor": record_ids[block.anchor],
        "members": [record_ids[i] for i in m.indices],
        "distances": m.distances.tolist(),
    }


def write_jsonl(path, rows: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True))
            fh.write("\n")
