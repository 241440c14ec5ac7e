"""Independent reference implementations used as test oracles.

These are deliberately slow and simple: plain Python or dense numpy, with
no shared code paths with the package under test.
"""

from functools import lru_cache

import numpy as np


def lattice_levenshtein(a: str, b: str) -> int:
    """Edit distance by memoized recursion over the full edit lattice."""

    @lru_cache(maxsize=None)
    def go(i, j):
        if i == len(a):
            return len(b) - j
        if j == len(b):
            return len(a) - i
        return min(go(i + 1, j) + 1, go(i, j + 1) + 1, go(i + 1, j + 1) + (a[i] != b[j]))

    return go(0, 0)


def scan_knn(points, q, k, exclude=-1):
    """Linear scan, ordered by (squared distance, index), distances summed left to right."""
    cands = []
    for j, p in enumerate(points):
        if j == exclude:
            continue
        s = 0.0
        for a, b in zip(p, q):
            s += (a - b) * (a - b)
        cands.append((s, j))
    cands.sort()
    top = cands[:k]
    return [j for _, j in top], [float(np.sqrt(s)) for s, _ in top]


def oos_grid(landmarks, deltas, y):
    """Landmark stress evaluated on a batch of candidate points ``y`` (m, K)."""
    d = np.sqrt(((y[:, None, :] - landmarks[None, :, :]) ** 2).sum(axis=2))
    return ((d - deltas[None, :]) ** 2).sum(axis=1)


def grid_min_1d(landmarks, deltas, lo=-5.0, hi=15.0, step=1e-4):
    ys = np.arange(lo, hi + step / 2, step)[:, None]
    vals = oos_grid(np.asarray(landmarks, float), np.asarray(deltas, float), ys)
    i = int(np.argmin(vals))
    return float(vals[i]), ys[i]


def grid_min_2d(landmarks, deltas, lo=-10.0, hi=10.0, coarse=0.01, fine=1e-4, keep=20):
    """Coarse grid over the box, then a fine grid around the best coarse cells."""
    X = np.asarray(landmarks, float)
    d = np.asarray(deltas, float)
    axis = np.arange(lo, hi + coarse / 2, coarse)
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    vals = oos_grid(X, d, pts)
    best_val, best_pt = np.inf, None
    offs = np.arange(-2 * coarse, 2 * coarse + fine / 2, fine)
    fx, fy = np.meshgrid(offs, offs, indexing="ij")
    local = np.column_stack([fx.ravel(), fy.ravel()])
    for i in np.argsort(vals)[:keep]:
        cand = pts[i] + local
        v = oos_grid(X, d, cand)
        j = int(np.argmin(v))
        if v[j] < best_val:
            best_val, best_pt = float(v[j]), cand[j]
    return best_val, best_pt


def greedy_farthest_first(values, L):
    """Farthest-first traversal with the lexicographic start and smallest-index ties."""
    n = len(values)
    chosen = [min(range(n), key=lambda i: (values[i], i))]
    while len(chosen) < L:
        best, best_i = -1, -1
        for i in range(n):
            if i in chosen:
                continue
            m = min(lattice_levenshtein(values[i], values[c]) for c in chosen)
            if m > best:
                best, best_i = m, i
        chosen.append(best_i)
    return chosen


def random_dissimilarity(rng, n):
    """A random symmetric non-negative matrix with zero diagonal (not necessarily metric)."""
    A = rng.uniform(0.1, 5.0, size=(n, n))
    D = np.triu(A, 1)
    return D + D.T
