"""Embedding-based blocking for entity resolution.

Blocking keys are embedded into a low-dimensional Euclidean space by
least-squares MDS on a landmark subset, indexed with a Kd-tree, and blocked
by k-nearest-neighbour search.
"""

__version__ = "0.1.0"

from .embedding import (
    Configuration,
    Embedding,
    OosConfig,
    StressConfig,
    embed_dataset,
    embed_out_of_sample,
    lsmds_full,
    normalized_stress,
    raw_stress,
    select_landmarks_farthest_first,
)
from .kdtree import KdTree, NeighbourList, build_kdtree, knn
from .pipelines import (
    Block,
    CandidatePair,
    QueryEngine,
    QueryResult,
    StreamReport,
    candidate_pairs,
    dedup_index,
    process_query,
    run_query_stream,
)
from .records import Record, RecordSet, make_blocking_value
from .strdist import distance_matrix, euclidean, levenshtein

__all__ = [
    "Block", "CandidatePair", "Configuration", "Embedding", "KdTree", "NeighbourList", "OosConfig",
    "QueryEngine", "QueryResult", "Record", "RecordSet", "StreamReport", "StressConfig",
    "build_kdtree", "candidate_pairs", "dedup_index", "distance_matrix", "embed_dataset",
    "embed_out_of_sample", "euclidean", "knn", "levenshtein", "lsmds_full", "make_blocking_value",
    "normalized_stress", "process_query", "raw_stress", "run_query_stream",
    "select_landmarks_farthest_first",
]
