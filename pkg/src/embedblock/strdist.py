"""Distance kernels: Levenshtein between strings, Euclidean between points.

Strings are compared on Unicode code points. The batch kernels are compiled
with numba; every string-pair evaluation is tallied in ``LEVENSHTEIN_CALLS``
so callers can audit how much original-space work a stage performed.
"""

from __future__ import annotations

import math
import threading
from pathlib import Path
from typing import Sequence

import numpy as np
from numba import njit


class CallCounter:
    """Thread-safe tally of kernel invocations."""

    def __init__(self):
        self._count = 0
        self._lock = threading.Lock()

    def add(self, n: int) -> None:
        with self._lock:
            self._count += int(n)

    def reset(self) -> None:
        with self._lock:
            self._count = 0

    @property
    def count(self) -> int:
        return self._count


LEVENSHTEIN_CALLS = CallCounter()


class EncodedStrings:
    """A list of strings packed into one code-point array for the compiled kernels."""

    def __init__(self, values: Sequence[str]):
        self.values = list(values)
        lengths = np.fromiter((len(v) for v in self.values), dtype=np.int64, count=len(self.values))
        self.offsets = np.zeros(len(self.values) + 1, dtype=np.int64)
        np.cumsum(lengths, out=self.offsets[1:])
        self.codes = _encode("".join(self.values))

    def __len__(self) -> int:
        return len(self.values)


def _encode(s: str) -> np.ndarray:
    return np.frombuffer(s.encode("utf-32-le"), dtype=np.uint32).astype(np.int32)


@njit(cache=True, nogil=True)
def _lev(a, b):
    n = a.shape[0]
    m = b.shape[0]
    if n < m:
        a, b = b, a
        n, m = m, n
    if m == 0:
        return n
    prev = np.arange(m + 1)
    cur = np.empty(m + 1, dtype=prev.dtype)
    for i in range(1, n + 1):
        cur[0] = i
        ai = a[i - 1]
        for j in range(1, m + 1):
            cost = 0 if ai == b[j - 1] else 1
            best = prev[j - 1] + cost
            if prev[j] + 1 < best:
                best = prev[j] + 1
            if cur[j - 1] + 1 < best:
                best = cur[j - 1] + 1
            cur[j] = best
        prev, cur = cur, prev
    return prev[m]


@njit(cache=True, nogil=True)
def _lev_one_to_many(query, codes, offsets, targets):
    out = np.empty(targets.shape[0], dtype=np.int64)
    for t in range(targets.shape[0]):
        j = targets[t]
        out[t] = _lev(query, codes[offsets[j]:offsets[j + 1]])
    return out


@njit(cache=True, nogil=True)
def _lev_upper_triangle(codes, offsets):
    n = offsets.shape[0] - 1
    out = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        a = codes[offsets[i]:offsets[i + 1]]
        for j in range(i + 1, n):
            d = _lev(a, codes[offsets[j]:offsets[j + 1]])
            out[i, j] = d
            out[j, i] = d
    return out


@njit(cache=True, nogil=True)
def _lev_pairs(codes, offsets, left, right):
    out = np.empty(left.shape[0], dtype=np.int64)
    for t in range(left.shape[0]):
        i = left[t]
        j = right[t]
        out[t] = _lev(codes[offsets[i]:offsets[i + 1]], codes[offsets[j]:offsets[j + 1]])
    return out


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance (insertions, deletions, substitutions)."""
    LEVENSHTEIN_CALLS.add(1)
    return int(_lev(_encode(a), _encode(b)))


def levenshtein_to_many(
    query: str,
    values: Sequence[str] | EncodedStrings,
    targets: Sequence[int] | np.ndarray | None = None,
) -> np.ndarray:
    """Distances from ``query`` to ``values[targets]`` (all values by default).

    Returns an int64 array aligned with ``targets``.
    """
    enc = values if isinstance(values, EncodedStrings) else EncodedStrings(values)
    if targets is None:
        idx = np.arange(len(enc), dtype=np.int64)
    else:
        idx = np.asarray(targets, dtype=np.int64)
    LEVENSHTEIN_CALLS.add(idx.shape[0])
    if idx.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    return _lev_one_to_many(_encode(query), enc.codes, enc.offsets, idx)


def levenshtein_pairs(values: Sequence[str] | EncodedStrings, left, right) -> np.ndarray:
    """Distances ``lev(values[left[t]], values[right[t]])`` for aligned index arrays."""
    enc = values if isinstance(values, EncodedStrings) else EncodedStrings(values)
    left = np.asarray(left, dtype=np.int64)
    right = np.asarray(right, dtype=np.int64)
    if left.shape != right.shape:
        raise ValueError("left and right index arrays must align")
    LEVENSHTEIN_CALLS.add(left.shape[0])
    return _lev_pairs(enc.codes, enc.offsets, left, right)


def distance_matrix(values: Sequence[str] | EncodedStrings) -> np.ndarray:
    """Dense symmetric matrix of pairwise Levenshtein distances.

    Performs exactly ``n(n-1)/2`` kernel evaluations; the diagonal is zero.
    """
    enc = values if isinstance(values, EncodedStrings) else EncodedStrings(values)
    n = len(enc)
    if n < 1:
        raise ValueError("distance_matrix needs at least one value")
    LEVENSHTEIN_CALLS.add(n * (n - 1) // 2)
    return _lev_upper_triangle(enc.codes, enc.offsets)


def euclidean(p, q) -> float:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"dimension mismatch: {p.shape} vs {q.shape}")
    return math.sqrt(float(np.sum((p - q) ** 2)))


def check_dissimilarity(D) -> np.ndarray:
    """Validate a dissimilarity matrix and return it as a float array."""
    D = np.asarray(D, dtype=np.float64)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValueError(f"dissimilarity matrix must be square, got shape {D.shape}")
    if np.any(D < 0) or not np.all(np.isfinite(D)):
        raise ValueError("dissimilarities must be finite and non-negative")
    if np.any(np.diag(D) != 0):
        raise ValueError("dissimilarity diagonal must be zero")
    if not np.array_equal(D, D.T):
        raise ValueError("dissimilarity matrix must be symmetric")
    return D


def save_dissimilarity(path: str | Path, D: np.ndarray) -> None:
    """Write ``D`` as CSV: first line ``n``, then ``n`` row-major rows."""
    D = check_dissimilarity(D)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{D.shape[0]}\n")
        for row in D:
            fh.write(",".join(repr(float(x)) for x in row))
            fh.write("\n")


def load_dissimilarity(path: str | Path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        n = int(fh.readline())
        rows = [[float(x) for x in line.split(",")] for line in fh if line.strip()]
    D = np.array(rows, dtype=np.float64).reshape(n, n) if n else np.zeros((0, 0))
    return check_dissimilarity(D)
