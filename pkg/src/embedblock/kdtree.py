"""Static Kd-tree with exact k-nearest-neighbour search.

Nodes split at the lower median along ``depth mod K``; each internal node
keeps its median point, and nodes with at most ``leaf_capacity`` points
become leaves. Neighbours are ordered by ``(distance, index)``, so results
are reproducible when distances tie.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

DEFAULT_LEAF_CAPACITY = 16


@dataclass(frozen=True)
class NeighbourList:
    """Neighbours in ascending ``(distance, index)`` order."""

    indices: np.ndarray
    distances: np.ndarray
    visited: int = 0

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(zip(self.indices.tolist(), self.distances.tolist()))


class KdTree:
    """Kd-tree over an ``(n, K)`` coordinate array.

    The node arrays are flat so the search can run compiled. ``point`` is
    ``-1`` for leaves; leaf members live in ``leaf_items[leaf_start:leaf_end]``.
    """

    def __init__(self, points, leaf_capacity: int = DEFAULT_LEAF_CAPACITY):
        pts = np.ascontiguousarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] == 0:
            raise ValueError("need a non-empty (n, K) point array")
        if leaf_capacity < 1:
            raise ValueError("leaf_capacity must be at least 1")
        self.points = pts
        self.leaf_capacity = leaf_capacity
        self._dim: list[int] = []
        self._split: list[float] = []
        self._point: list[int] = []
        self._left: list[int] = []
        self._right: list[int] = []
        self._leaf_start: list[int] = []
        self._leaf_end: list[int] = []
        self._leaf_items: list[int] = []
        self._build(np.arange(pts.shape[0], dtype=np.int64), 0)
        self.dim = np.array(self._dim, dtype=np.int64)
        self.split = np.array(self._split, dtype=np.float64)
        self.point = np.array(self._point, dtype=np.int64)
        self.left = np.array(self._left, dtype=np.int64)
        self.right = np.array(self._right, dtype=np.int64)
        self.leaf_start = np.array(self._leaf_start, dtype=np.int64)
        self.leaf_end = np.array(self._leaf_end, dtype=np.int64)
        self.leaf_items = np.array(self._leaf_items, dtype=np.int64)
        del self._dim, self._split, self._point, self._left, self._right
        del self._leaf_start, self._leaf_end, self._leaf_items

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def K(self) -> int:
        return self.points.shape[1]

    @property
    def n_nodes(self) -> int:
        return self.dim.shape[0]

    def _new_node(self) -> int:
        self._dim.append(-1)
        self._split.append(math.nan)
        self._point.append(-1)
        self._left.append(-1)
        self._right.append(-1)
        self._leaf_start.append(0)
        self._leaf_end.append(0)
        return len(self._dim) - 1

    def _build(self, idx: np.ndarray, depth: int) -> int:
        node = self._new_node()
        if idx.shape[0] <= self.leaf_capacity:
            self._leaf_start[node] = len(self._leaf_items)
            self._leaf_items.extend(np.sort(idx).tolist())
            self._leaf_end[node] = len(self._leaf_items)
            return node
        d = depth % self.K
        coord = self.points[idx, d]
        order = idx[np.lexsort((idx, coord))]
        m = (order.shape[0] - 1) // 2
        median = int(order[m])
        self._dim[node] = d
        self._split[node] = float(self.points[median, d])
        self._point[node] = median
        if m > 0:
            self._left[node] = self._build(order[:m], depth + 1)
        if m + 1 < order.shape[0]:
            self._right[node] = self._build(order[m + 1:], depth + 1)
        return node

    def _arrays(self):
        return (
            self.points, self.dim, self.split, self.point, self.left, self.right,
            self.leaf_start, self.leaf_end, self.leaf_items,
        )

    def knn(self, q, k: int, exclude: int = -1) -> NeighbourList:
        """The ``min(k, n)`` points closest to ``q``.

        ``exclude`` drops one point index from consideration (used to keep a
        point out of its own block).
        """
        if k < 1:
            raise ValueError("k must be at least 1")
        q = np.ascontiguousarray(q, dtype=np.float64)
        if q.shape != (self.K,):
            raise ValueError(f"query must have dimension {self.K}, got shape {q.shape}")
        idx, dist, visited = _knn(*self._arrays(), q, k, exclude)
        return NeighbourList(idx, dist, int(visited))

    def knn_all(self, k: int, exclude_self: bool = True) -> tuple[np.ndarray, np.ndarray]:
        """k-NN of every indexed point, as ``(n, k')`` index and distance arrays.

        ``k' = min(k, n - 1)`` when the anchor is excluded, else ``min(k, n)``.
        """
        if k < 1:
            raise ValueError("k must be at least 1")
        width = min(k, self.n - 1 if exclude_self else self.n)
        return _knn_all(*self._arrays(), k, width, exclude_self)


def build_kdtree(points, leaf_capacity: int = DEFAULT_LEAF_CAPACITY) -> KdTree:
    return KdTree(points, leaf_capacity)


def knn(tree: KdTree, q, k: int) -> NeighbourList:
    return tree.knn(q, k)


@njit(cache=True, nogil=True, inline="always")
def _worse(da, ia, db, ib):
    return da > db or (da == db and ia > ib)


@njit(cache=True, nogil=True)
def _heap_push(hd, hi, size, d, i):
    # max-heap on (distance, index) holding the current best candidates
    pos = size
    hd[pos] = d
    hi[pos] = i
    while pos > 0:
        parent = (pos - 1) // 2
        if _worse(hd[pos], hi[pos], hd[parent], hi[parent]):
            hd[pos], hd[parent] = hd[parent], hd[pos]
            hi[pos], hi[parent] = hi[parent], hi[pos]
            pos = parent
        else:
            break


@njit(cache=True, nogil=True)
def _heap_replace_top(hd, hi, size, d, i):
    hd[0] = d
    hi[0] = i
    pos = 0
    while True:
        left = 2 * pos + 1
        right = left + 1
        big = pos
        if left < size and _worse(hd[left], hi[left], hd[big], hi[big]):
            big = left
        if right < size and _worse(hd[right], hi[right], hd[big], hi[big]):
            big = right
        if big == pos:
            break
        hd[pos], hd[big] = hd[big], hd[pos]
        hi[pos], hi[big] = hi[big], hi[pos]
        pos = big


@njit(cache=True, nogil=True)
def _sq_dist(points, j, q):
    s = 0.0
    for c in range(q.shape[0]):
        diff = points[j, c] - q[c]
        s += diff * diff
    return s


@njit(cache=True, nogil=True)
def _knn(points, dim, split, point, left, right, leaf_start, leaf_end, leaf_items, q, k, exclude):
    n = points.shape[0]
    cap = min(k, n)
    hd = np.empty(cap)
    hi = np.empty(cap, dtype=np.int64)
    size = 0
    visited = 0
    stack_node = np.empty(2 * dim.shape[0] + 2, dtype=np.int64)
    stack_bound = np.empty(2 * dim.shape[0] + 2)
    top = 0
    stack_node[0] = 0
    stack_bound[0] = 0.0
    top = 1
    while top > 0:
        top -= 1
        node = stack_node[top]
        bound = stack_bound[top]
        if size == cap and bound > hd[0]:
            continue
        if point[node] < 0:
            for t in range(leaf_start[node], leaf_end[node]):
                j = leaf_items[t]
                if j == exclude:
                    continue
                visited += 1
                d = _sq_dist(points, j, q)
                if size < cap:
                    _heap_push(hd, hi, size, d, j)
                    size += 1
                elif _worse(hd[0], hi[0], d, j):
                    _heap_replace_top(hd, hi, size, d, j)
            continue
        j = point[node]
        if j != exclude:
            visited += 1
            d = _sq_dist(points, j, q)
            if size < cap:
                _heap_push(hd, hi, size, d, j)
                size += 1
            elif _worse(hd[0], hi[0], d, j):
                _heap_replace_top(hd, hi, size, d, j)
        diff = q[dim[node]] - split[node]
        plane = diff * diff
        if diff <= 0.0:
            near = left[node]
            far = right[node]
        else:
            near = right[node]
            far = left[node]
        # far side goes on the stack first so the near side is searched first
        if far >= 0:
            stack_node[top] = far
            stack_bound[top] = max(bound, plane)
            top += 1
        if near >= 0:
            stack_node[top] = near
            stack_bound[top] = bound
            top += 1
    # heap -> ascending order
    order_d = np.empty(size)
    order_i = np.empty(size, dtype=np.int64)
    m = size
    while m > 0:
        order_d[m - 1] = hd[0]
        order_i[m - 1] = hi[0]
        m -= 1
        if m > 0:
            last_d = hd[m]
            last_i = hi[m]
            _heap_replace_top(hd, hi, m, last_d, last_i)
    return order_i, np.sqrt(order_d), visited


@njit(cache=True, nogil=True)
def _knn_all(points, dim, split, point, left, right, leaf_start, leaf_end, leaf_items, k, width, exclude_self):
    n = points.shape[0]
    out_i = np.empty((n, width), dtype=np.int64)
    out_d = np.empty((n, width))
    for a in range(n):
        ex = a if exclude_self else -1
        idx, dist, _ = _knn(
            points, dim, split, point, left, right, leaf_start, leaf_end, leaf_items,
            points[a].copy(), k, ex,
        )
        out_i[a, :] = idx[:width]
        out_d[a, :] = dist[:width]
    return out_i, out_d
