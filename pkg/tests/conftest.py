"""Shared strategies and oracle helpers for the test suite."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from hypothesis import strategies as st

from propgraph import BoundingBox, graph_from_edges

# Coordinates on a dyadic grid: sums and differences of grid points are
# exact in binary floating point, which lets invariance properties assert
# bitwise equality instead of tolerances.
GRID = 1024


@st.composite
def dyadic_boxes(draw) -> BoundingBox:
    x1 = draw(st.integers(min_value=0, max_value=GRID - 1))
    x2 = draw(st.integers(min_value=x1 + 1, max_value=GRID))
    y1 = draw(st.integers(min_value=0, max_value=GRID - 1))
    y2 = draw(st.integers(min_value=y1 + 1, max_value=GRID))
    return BoundingBox(x1 / GRID, y1 / GRID, x2 / GRID, y2 / GRID)


def exact_iou(a: BoundingBox, b: BoundingBox) -> Fraction:
    """Rational-arithmetic IoU; independent of the float implementation."""
    ax1, ay1, ax2, ay2 = (Fraction(v) for v in a.as_tuple())
    bx1, by1, bx2, by2 = (Fraction(v) for v in b.as_tuple())
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0 or ih <= 0:
        return Fraction(0)
    inter = iw * ih
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    return inter / union


def grid_area_iou(a: BoundingBox, b: BoundingBox, resolution: int = 2000) -> float:
    """Rasterized-area IoU: count sample-point hits on a fine grid."""
    points = (np.arange(resolution) + 0.5) / resolution
    xs = points[None, :]
    ys = points[:, None]

    def inside(box: BoundingBox) -> np.ndarray:
        return (xs > box.x1) & (xs < box.x2) & (ys > box.y1) & (ys < box.y2)

    in_a = inside(a)
    in_b = inside(b)
    union = np.count_nonzero(in_a | in_b)
    if union == 0:
        return 0.0
    return np.count_nonzero(in_a & in_b) / union


def random_connected_graph(rng: np.random.Generator, n: int, features: int = 0):
    """Random spanning tree plus extra edges; weights in (0.05, 1]."""
    edges = {}
    for node in range(1, n):
        parent = int(rng.integers(0, node))
        edges[(parent, node)] = float(rng.uniform(0.05, 1.0))
    for _ in range(int(rng.integers(0, n))):
        i = int(rng.integers(0, n))
        j = int(rng.integers(0, n))
        if i != j:
            edges[(min(i, j), max(i, j))] = float(rng.uniform(0.05, 1.0))
    feats = rng.normal(size=(n, features)) if features else None
    return graph_from_edges(n, [(i, j, w) for (i, j), w in edges.items()], features=feats)


def bridged_cliques(k: int, bridge_weight: float):
    """Two unit-weight k-cliques joined by one bridge of the given weight."""
    edges = []
    for i in range(k):
        for j in range(i + 1, k):
            edges.append((i, j, 1.0))
            edges.append((k + i, k + j, 1.0))
    edges.append((0, k, bridge_weight))
    return graph_from_edges(2 * k, edges)
