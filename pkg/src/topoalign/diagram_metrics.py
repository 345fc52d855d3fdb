"""Bottleneck and p-Wasserstein distances between persistence diagrams.

Both metrics work on the finite features of a single homology dimension;
essential features are excluded. The ground metric is the infinity norm on
(birth, death), and every feature may be matched to its projection onto
the diagonal at cost (death - birth) / 2.

The Wasserstein route solves an exact assignment on the diagonal-augmented
cost matrix. The bottleneck route binary-searches the candidate costs,
checking feasibility with a bipartite matching.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .persistence import PersistenceDiagram

DIAGONAL = -1
"""Sentinel used in matchings for a feature paired with the diagonal."""


@dataclass(frozen=True)
class DiagramMatching:
    """An augmented bijection between two diagrams and its total cost.

    ``pairs`` holds (index into d1 or DIAGONAL, index into d2 or DIAGONAL);
    every finite feature of each diagram appears exactly once.
    """

    pairs: tuple
    cost: float


def _finite(d: PersistenceDiagram, dim: int) -> np.ndarray:
    feats = [(f.birth, f.death) for f in d.features if f.dim == dim and not f.essential]
    if not feats:
        return np.empty((0, 2), dtype=np.float64)
    return np.array(feats, dtype=np.float64)


def _cross_costs(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Infinity-norm distances between feature sets, shape (len(a), len(b))."""
    if a.shape[0] == 0 or b.shape[0] == 0:
        return np.empty((a.shape[0], b.shape[0]), dtype=np.float64)
    return np.abs(a[:, None, :] - b[None, :, :]).max(axis=2)


def _diag_costs(a: np.ndarray) -> np.ndarray:
    return (a[:, 1] - a[:, 0]) / 2.0 if a.shape[0] else np.empty(0)


def _feasible(cross, diag1, diag2, c):
    """Is there a perfect augmented matching using only costs <= c?"""
    m1, m2 = cross.shape
    size = m1 + m2
    # adjacency: left = features1 + diagonal slots, right = features2 + slots
    adj = [[] for _ in range(size)]
    for i in range(m1):
        for j in range(m2):
            if cross[i, j] <= c:
                adj[i].append(j)
        if diag1[i] <= c:
            adj[i].extend(range(m2, size))
    for s in range(m1, size):
        adj[s].extend(j for j in range(m2) if diag2[j] <= c)
        adj[s].extend(range(m2, size))

    match_right = [-1] * size

    def augment(u, seen):
        for v in adj[u]:
            if seen[v]:
                continue
            seen[v] = True
            if match_right[v] == -1 or augment(match_right[v], seen):
                match_right[v] = u
                return True
        return False

    matched = 0
    for u in range(size):
        if augment(u, [False] * size):
            matched += 1
        else:
            return False
    return matched == size


def bottleneck_distance(d1: PersistenceDiagram, d2: PersistenceDiagram, dim: int = 0) -> float:
    """Smallest achievable maximum per-pair cost over augmented bijections."""
    a = _finite(d1, dim)
    b = _finite(d2, dim)
    if a.shape[0] == 0 and b.shape[0] == 0:
        return 0.0
    cross = _cross_costs(a, b)
    diag1 = _diag_costs(a)
    diag2 = _diag_costs(b)
    candidates = np.unique(np.concatenate([cross.ravel(), diag1, diag2, [0.0]]))
    lo, hi = 0, len(candidates) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _feasible(cross, diag1, diag2, candidates[mid]):
            hi = mid
        else:
            lo = mid + 1
    return float(candidates[lo])


def wasserstein_matching(
    d1: PersistenceDiagram, d2: PersistenceDiagram, p: float = 1.0, dim: int = 0
) -> DiagramMatching:
    """Optimal augmented matching minimizing the sum of infinity-norm costs^p."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    a = _finite(d1, dim)
    b = _finite(d2, dim)
    m1, m2 = a.shape[0], b.shape[0]
    if m1 == 0 and m2 == 0:
        return DiagramMatching((), 0.0)

    size = m1 + m2
    cost = np.zeros((size, size), dtype=np.float64)
    cost[:m1, :m2] = _cross_costs(a, b) ** p
    cost[:m1, m2:] = (_diag_costs(a) ** p)[:, None]
    cost[m1:, :m2] = (_diag_costs(b) ** p)[None, :]
    rows, cols = linear_sum_assignment(cost)

    pairs = []
    total = 0.0
    for r, c in zip(rows, cols):
        total += cost[r, c]
        left = int(r) if r < m1 else DIAGONAL
        right = int(c) if c < m2 else DIAGONAL
        if left == DIAGONAL and right == DIAGONAL:
            continue
        pairs.append((left, right))
    return DiagramMatching(tuple(pairs), float(total ** (1.0 / p)))


def wasserstein_distance(
    d1: PersistenceDiagram, d2: PersistenceDiagram, p: float = 1.0, dim: int = 0
) -> float:
    """p-Wasserstein distance between two diagrams (diagonal-augmented)."""
    return wasserstein_matching(d1, d2, p, dim).cost
