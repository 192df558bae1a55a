"""Normalized-cut machinery.

The partition objective for disjoint sets A_1..A_k of a weighted graph is

    sum_j cut(A_j, rest) / assoc(A_j, all nodes)

where assoc is the weighted-degree sum of the set. Bipartitioning relaxes
the objective through the symmetric normalized Laplacian: take the
eigenvector of the second-smallest eigenvalue, map it back through
D^{-1/2}, and sweep every prefix split of the induced node ordering,
scoring each with the exact objective. Recursive application with a stop
threshold yields a k-way partition without fixing k in advance.

Everything here is deterministic: the eigensolver is a cyclic Jacobi
iteration (no BLAS), eigenvector signs are pinned, and all ties break on
explicit keys.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import InputError, NumericalError
from .graph import ProposalGraph, connected_components

DEFAULT_EIG_TOL = 1e-10
DEFAULT_EIG_MAX_SWEEPS = 100
_RESIDUAL_TOL = 1e-9
_BRUTE_FORCE_MAX_NODES = 15


@dataclass(frozen=True, eq=False)
class Partition:
    """Dense labeling of nodes into ``set_count`` non-empty disjoint sets."""

    labels: np.ndarray
    set_count: int

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        object.__setattr__(self, "labels", labels)
        if self.set_count < 1:
            raise InputError("a partition needs at least one set")
        if labels.size == 0:
            raise InputError("a partition must cover at least one node")
        if labels.min() < 0 or labels.max() >= self.set_count:
            raise InputError("labels must lie in [0, set_count)")
        if np.unique(labels).size != self.set_count:
            raise InputError("every set in a partition must be non-empty")

    def members(self, label: int) -> np.ndarray:
        return np.flatnonzero(self.labels == label)


@dataclass(frozen=True)
class CutReport:
    """Objective value plus the per-set (cut, assoc) pairs it was built from."""

    ncut_value: float
    per_set: tuple[tuple[float, float], ...]


def assoc(g: ProposalGraph, nodes: Iterable[int] | np.ndarray) -> float:
    """Total connection from ``nodes`` to the whole graph: sum of weighted degrees."""
    idx = np.asarray(list(nodes) if not isinstance(nodes, np.ndarray) else nodes, dtype=np.int64)
    if idx.size == 0:
        return 0.0
    if idx.min() < 0 or idx.max() >= g.num_nodes:
        raise InputError("node index out of range")
    return float(g.degrees()[idx].sum())


def ncut_value(g: ProposalGraph, partition: Partition) -> CutReport:
    """Evaluate the exact partition objective.

    Raises InputError when the partition does not cover the graph or when a
    set has zero association (an all-isolated set makes the ratio undefined).
    """
    labels = partition.labels
    if labels.shape[0] != g.num_nodes:
        raise InputError(f"partition covers {labels.shape[0]} nodes, graph has {g.num_nodes}")
    w = g.adjacency()
    degrees = w.sum(axis=1)
    per_set: list[tuple[float, float]] = []
    total = 0.0
    for label in range(partition.set_count):
        inside = labels == label
        cut = float(w[np.ix_(inside, ~inside)].sum())
        assoc_j = float(degrees[inside].sum())
        if assoc_j == 0.0:
            raise InputError(f"degenerate partition: set {label} has zero association")
        per_set.append((cut, assoc_j))
        total += cut / assoc_j
    return CutReport(ncut_value=total, per_set=tuple(per_set))


def normalized_laplacian(g: ProposalGraph) -> np.ndarray:
    """Symmetric normalized Laplacian I - D^{-1/2} W D^{-1/2}.

    Requires every weighted degree to be positive (connected graphs with at
    least one edge qualify). Eigenvalues lie in [0, 2]; for a connected
    graph the eigenvalue 0 is simple with eigenvector D^{1/2} 1.
    """
    w = g.adjacency()
    degrees = w.sum(axis=1)
    if g.num_nodes == 0:
        raise InputError("empty graph has no Laplacian")
    if np.any(degrees <= 0.0):
        raise InputError("normalized Laplacian undefined for zero-degree nodes")
    inv_sqrt = 1.0 / np.sqrt(degrees)
    lap = -(w * inv_sqrt[:, None]) * inv_sqrt[None, :]
    np.fill_diagonal(lap, 1.0)
    return lap


def _round_robin_rounds(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Chess-tournament schedule: n-1 rounds of disjoint index pairs covering all pairs."""
    players = list(range(n)) if n % 2 == 0 else list(range(n)) + [-1]
    size = len(players)
    rounds = []
    for _ in range(size - 1):
        p = []
        q = []
        for k in range(size // 2):
            a, b = players[k], players[size - 1 - k]
            if a != -1 and b != -1:
                p.append(min(a, b))
                q.append(max(a, b))
        rounds.append((np.array(p, dtype=np.int64), np.array(q, dtype=np.int64)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def symmetric_eigendecomposition(
    matrix: np.ndarray,
    tol: float = DEFAULT_EIG_TOL,
    max_sweeps: int = DEFAULT_EIG_MAX_SWEEPS,
) -> tuple[np.ndarray, np.ndarray]:
    """Full eigendecomposition of a symmetric matrix by Jacobi rotations.

    Returns (eigenvalues ascending, eigenvector columns). One sweep visits
    every index pair once, organized as rounds of mutually disjoint pairs so
    each round's rotations apply as one vectorized orthogonal update.
    Convergence is declared when the off-diagonal Frobenius norm drops below
    ``tol``; exhausting ``max_sweeps`` raises NumericalError. The iteration
    is pure numpy with a fixed rotation order, so results are
    bit-reproducible and independent of any BLAS threading.
    """
    a = np.array(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputError("matrix must be square")
    n = a.shape[0]
    if n == 0:
        return np.zeros(0), np.zeros((0, 0))
    if not np.all(np.isfinite(a)):
        raise InputError("matrix entries must be finite")
    if np.max(np.abs(a - a.T), initial=0.0) > 1e-12 * max(1.0, float(np.max(np.abs(a)))):
        raise InputError("matrix must be symmetric")
    a = (a + a.T) / 2.0
    vectors = np.eye(n)
    if n == 1:
        return a[0, :1].copy(), vectors
    rounds = _round_robin_rounds(n)
    # Entries below skip_tol stay unrotated; together they cannot lift the
    # off-norm above tol.
    skip_tol = tol / (2.0 * n)
    for _ in range(max_sweeps):
        upper = np.triu(a, 1)
        off = np.sqrt(2.0 * np.sum(upper * upper))
        if off <= tol:
            eigenvalues = np.diag(a).copy()
            order = np.argsort(eigenvalues, kind="stable")
            return eigenvalues[order], vectors[:, order]
        # Rounding in the two-sided updates drifts symmetry by ~eps per
        # sweep; rebuild from the upper triangle to keep it exact.
        diagonal = np.diag(a).copy()
        a = upper + upper.T
        np.fill_diagonal(a, diagonal)
        for p, q in rounds:
            apq = a[p, q]
            active = np.abs(apq) > skip_tol
            if not np.any(active):
                continue
            apq_safe = np.where(active, apq, 1.0)
            theta = (a[q, q] - a[p, p]) / (2.0 * apq_safe)
            sign = np.where(theta < 0.0, -1.0, 1.0)
            with np.errstate(over="ignore", divide="ignore"):
                t = sign / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
                big = np.abs(theta) > 1e10
                t = np.where(big, 1.0 / (2.0 * theta), t)
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            diag_p = a[p, p] - t * apq
            diag_q = a[q, q] + t * apq
            rows_p = a[p, :]
            rows_q = a[q, :]
            a[p, :] = c[:, None] * rows_p - s[:, None] * rows_q
            a[q, :] = s[:, None] * rows_p + c[:, None] * rows_q
            cols_p = a[:, p]
            cols_q = a[:, q]
            a[:, p] = c[None, :] * cols_p - s[None, :] * cols_q
            a[:, q] = s[None, :] * cols_p + c[None, :] * cols_q
            # Pivot entries and the rotated diagonal are known analytically.
            a[p, q] = np.where(active, 0.0, a[p, q])
            a[q, p] = np.where(active, 0.0, a[q, p])
            a[p, p] = np.where(active, diag_p, a[p, p])
            a[q, q] = np.where(active, diag_q, a[q, q])
            vec_p = vectors[:, p]
            vec_q = vectors[:, q]
            vectors[:, p] = c[None, :] * vec_p - s[None, :] * vec_q
            vectors[:, q] = s[None, :] * vec_p + c[None, :] * vec_q
    raise NumericalError(
        f"Jacobi eigensolver did not converge in {max_sweeps} sweeps (off-norm target {tol})"
    )


def fiedler_vector(
    laplacian: np.ndarray,
    tol: float = DEFAULT_EIG_TOL,
    max_sweeps: int = DEFAULT_EIG_MAX_SWEEPS,
    residual_tol: float = _RESIDUAL_TOL,
) -> tuple[float, np.ndarray]:
    """Eigenpair of the second-smallest eigenvalue of a symmetric Laplacian.

    The vector is unit-norm with its largest-magnitude entry made positive,
    so repeated runs agree bit-for-bit. The eigenpair residual is verified
    against ``residual_tol``.
    """
    lap = np.asarray(laplacian, dtype=np.float64)
    if lap.ndim != 2 or lap.shape[0] != lap.shape[1] or lap.shape[0] < 2:
        raise InputError("Fiedler pair needs a square matrix of size >= 2")
    eigenvalues, vectors = symmetric_eigendecomposition(lap, tol=tol, max_sweeps=max_sweeps)
    value = float(eigenvalues[1])
    vector = vectors[:, 1].copy()
    vector /= np.sqrt(np.sum(vector * vector))
    anchor = int(np.argmax(np.abs(vector)))
    if vector[anchor] < 0.0:
        vector = -vector
    residual = np.max(np.abs(np.einsum("ij,j->i", lap, vector) - value * vector))
    if residual > residual_tol:
        raise NumericalError(f"eigenpair residual {residual:.3e} exceeds {residual_tol:.1e}")
    return value, vector


def _canonical_two_way(in_first: np.ndarray) -> np.ndarray:
    """Binary labels with the set containing node 0 relabeled to 0."""
    labels = np.where(in_first, 0, 1).astype(np.int64)
    if labels[0] == 1:
        labels = 1 - labels
    return labels


def two_way_ncut(
    g: ProposalGraph,
    eig_tol: float = DEFAULT_EIG_TOL,
    eig_max_sweeps: int = DEFAULT_EIG_MAX_SWEEPS,
) -> tuple[Partition, CutReport]:
    """Best sweep-cut bipartition along the Fiedler ordering.

    The Fiedler vector z of the normalized Laplacian is mapped back via
    y = D^{-1/2} z; nodes are sorted by y and each of the M-1 prefix splits
    is scored with the exact objective. Ties break toward the smaller
    node-0 set, then the smaller split index.
    """
    m = g.num_nodes
    if m < 2:
        raise InputError("two-way cut needs at least 2 nodes")
    if connected_components(g).count != 1:
        raise InputError("two-way cut requires a connected graph")
    w = g.adjacency()
    degrees = w.sum(axis=1)
    lap = normalized_laplacian(g)
    _, z = fiedler_vector(lap, tol=eig_tol, max_sweeps=eig_max_sweeps)
    y = z / np.sqrt(degrees)
    order = np.argsort(y, kind="stable")
    w_ord = w[np.ix_(order, order)]
    deg_ord = degrees[order]
    total_assoc = float(deg_ord.sum())
    position_of_node0 = int(np.flatnonzero(order == 0)[0])

    best_key: tuple[float, int, int] | None = None
    best_split = -1
    prefix_assoc = 0.0
    internal = 0.0
    for split in range(1, m):
        k = split - 1
        prefix_assoc += float(deg_ord[k])
        internal += float(w_ord[k, :k].sum())
        cut = prefix_assoc - 2.0 * internal
        rest_assoc = total_assoc - prefix_assoc
        value = cut / prefix_assoc + cut / rest_assoc
        first_size = split if position_of_node0 < split else m - split
        key = (value, first_size, split)
        if best_key is None or key < best_key:
            best_key = key
            best_split = split
    in_first = np.zeros(m, dtype=bool)
    in_first[order[:best_split]] = True
    partition = Partition(labels=_canonical_two_way(in_first), set_count=2)
    return partition, ncut_value(g, partition)


def recursive_ncut(
    g: ProposalGraph,
    stop_ncut: float,
    min_part: int = 1,
    eig_tol: float = DEFAULT_EIG_TOL,
    eig_max_sweeps: int = DEFAULT_EIG_MAX_SWEEPS,
) -> Partition:
    """Hierarchical bipartitioning with a stop threshold on the child objective.

    A split is kept only when its objective is <= ``stop_ncut`` and both
    sides have at least ``min_part`` nodes; otherwise the current node set
    becomes one final part. Sides that fall apart into components are peeled
    component-by-component (a zero-cut split) under the same size rule.
    Final labels are dense and ordered by each part's smallest node index.
    """
    if not np.isfinite(stop_ncut) or stop_ncut < 0.0:
        raise InputError(f"stop_ncut must be finite and >= 0, got {stop_ncut}")
    if min_part < 1:
        raise InputError(f"min_part must be >= 1, got {min_part}")
    m = g.num_nodes
    if m == 0:
        raise InputError("cannot partition an empty graph")
    parts: list[np.ndarray] = []
    stack: list[np.ndarray] = [np.arange(m, dtype=np.int64)]
    while stack:
        idx = stack.pop()
        if idx.size == 1:
            parts.append(idx)
            continue
        sub = g.subgraph(idx)
        components = connected_components(sub)
        if components.count > 1:
            first = idx[components.labels == 0]
            rest = idx[components.labels != 0]
            if min(first.size, rest.size) >= min_part:
                stack.append(rest)
                stack.append(first)
            else:
                parts.append(idx)
            continue
        partition, report = two_way_ncut(sub, eig_tol=eig_tol, eig_max_sweeps=eig_max_sweeps)
        side_a = idx[partition.labels == 0]
        side_b = idx[partition.labels == 1]
        if report.ncut_value <= stop_ncut and min(side_a.size, side_b.size) >= min_part:
            stack.append(side_b)
            stack.append(side_a)
        else:
            parts.append(idx)
    parts.sort(key=lambda members: int(members[0]))
    labels = np.zeros(m, dtype=np.int64)
    for label, members in enumerate(parts):
        labels[members] = label
    return Partition(labels=labels, set_count=len(parts))


def brute_force_ncut(g: ProposalGraph) -> tuple[Partition, CutReport]:
    """Exhaustive global optimum over all nontrivial bipartitions.

    Verification oracle for small graphs: enumerates the 2^(M-1) - 1
    bipartitions, so M is capped at 15. Ties break lexicographically on the
    canonical label vector.
    """
    m = g.num_nodes
    if m < 2:
        raise InputError("brute force needs at least 2 nodes")
    if m > _BRUTE_FORCE_MAX_NODES:
        raise InputError(f"brute force capped at {_BRUTE_FORCE_MAX_NODES} nodes, got {m}")
    w = g.adjacency()
    degrees = w.sum(axis=1)
    best_key: tuple[float, tuple[int, ...]] | None = None
    best_labels: np.ndarray | None = None
    # Node 0 stays in set 0; every mask chooses the membership of nodes 1..M-1.
    for mask in range(1, 1 << (m - 1)):
        labels = np.zeros(m, dtype=np.int64)
        for bit in range(m - 1):
            if mask >> bit & 1:
                labels[bit + 1] = 1
        inside = labels == 0
        assoc_a = float(degrees[inside].sum())
        assoc_b = float(degrees[~inside].sum())
        if assoc_a == 0.0 or assoc_b == 0.0:
            continue  # undefined objective: a side with no connections at all
        cut = float(w[np.ix_(inside, ~inside)].sum())
        value = cut / assoc_a + cut / assoc_b
        key = (value, tuple(int(x) for x in labels))
        if best_key is None or key < best_key:
            best_key = key
            best_labels = labels
    if best_labels is None:
        raise InputError("no bipartition with positive association on both sides")
    partition = Partition(labels=best_labels, set_count=2)
    return partition, ncut_value(g, partition)
