"""2D Kd-tree with exact, deterministically tie-broken nearest-neighbour queries.

Ties between equidistant points go to the point with the smallest ``y`` (row),
then the smallest ``x`` (column), then the lowest input index. Squared
distances are computed as ``dx*dx + dy*dy`` in double precision, the same
expression a linear scan uses, so the tree and a brute-force scan agree bit
for bit.
"""

from __future__ import annotations

import math

import numpy as np


class KdTree:
    """Axis-alternating median-split Kd-tree over 2D points.

    Nodes are stored in flat Python lists (one point per node), which keeps
    the scalar query loop free of numpy overhead.
    """

    def __init__(self, points):
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        if pts.shape[0] == 0:
            raise ValueError("cannot build a Kd-tree over zero points")
        if not np.all(np.isfinite(pts)):
            raise ValueError("Kd-tree points must be finite")
        self.points = pts
        n = pts.shape[0]
        self._x: list[float] = [0.0] * n
        self._y: list[float] = [0.0] * n
        self._index: list[int] = [0] * n
        self._axis: list[int] = [0] * n
        self._left: list[int] = [-1] * n
        self._right: list[int] = [-1] * n
        self._next = 0
        self.depth = 0
        self._root = self._build(np.arange(n), 0)

    def __len__(self) -> int:
        return self.points.shape[0]

    def _build(self, idx: np.ndarray, depth: int) -> int:
        if idx.size == 0:
            return -1
        self.depth = max(self.depth, depth)
        axis = depth % 2
        sub = self.points[idx]
        # sort by split coordinate, then the other coordinate, then input order
        order = np.lexsort((idx, sub[:, 1 - axis], sub[:, axis]))
        idx = idx[order]
        mid = idx.size // 2
        node = self._next
        self._next += 1
        i = int(idx[mid])
        self._x[node] = float(self.points[i, 0])
        self._y[node] = float(self.points[i, 1])
        self._index[node] = i
        self._axis[node] = axis
        self._left[node] = self._build(idx[:mid], depth + 1)
        self._right[node] = self._build(idx[mid + 1 :], depth + 1)
        return node

    def nearest_index(self, qx: float, qy: float) -> int:
        """Index (into the construction array) of the nearest point to ``(qx, qy)``."""
        xs, ys, idx = self._x, self._y, self._index
        axes, lefts, rights = self._axis, self._left, self._right
        best = -1
        best_d = math.inf
        bx = by = math.inf
        stack = [(self._root, 0.0)]
        while stack:
            node, bound = stack.pop()
            # ties must still be explored, hence strict comparison
            if bound > best_d:
                continue
            px = xs[node]
            py = ys[node]
            dx = qx - px
            dy = qy - py
            d = dx * dx + dy * dy
            if d < best_d or (
                d == best_d
                and (py < by or (py == by and (px < bx or (px == bx and idx[node] < idx[best]))))
            ):
                best, best_d, bx, by = node, d, px, py
            diff = dx if axes[node] == 0 else dy
            if diff < 0.0:
                near, far = lefts[node], rights[node]
            else:
                near, far = rights[node], lefts[node]
            if far >= 0:
                stack.append((far, diff * diff))
            if near >= 0:
                stack.append((near, 0.0))
        return self._index[best]

    def nearest(self, q) -> np.ndarray:
        return self.points[self.nearest_index(float(q[0]), float(q[1]))]

    def query(self, queries) -> np.ndarray:
        """Nearest-point indices for an ``(M, 2)`` array of queries."""
        q = np.asarray(queries, dtype=float).reshape(-1, 2)
        find = self.nearest_index
        return np.fromiter((find(x, y) for x, y in q.tolist()), dtype=np.intp, count=q.shape[0])


def linear_scan_nearest(points, q) -> int:
    """Brute-force nearest index with the same (distance, y, x) ordering."""
    pts = np.asarray(points, dtype=float)
    dx = float(q[0]) - pts[:, 0]
    dy = float(q[1]) - pts[:, 1]
    d = dx * dx + dy * dy
    return int(np.lexsort((pts[:, 0], pts[:, 1], d))[0])
