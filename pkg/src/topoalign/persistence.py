"""Vietoris-Rips persistent homology over a distance matrix.

Two computation routes are provided. ``h0_persistence`` runs a union-find
sweep over the sorted edge filtration and also reports the persistence
pairing (the vertex that created each component and the edge that merged
it away); its destroyer edges form the minimum spanning tree under the
tie-break order. ``rips_persistence`` performs general-dimension
persistence by reducing the boundary matrix over the two-element field and
is intended for small clouds only.

Determinism: edges are ordered by (length, i, j) and simplices by
(diameter, dimension, vertex tuple), so identical inputs always produce
identical diagrams and pairings.
"""

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .pointcloud import DistanceMatrix

ESSENTIAL = math.inf


class SimplexBudgetError(RuntimeError):
    """Raised when a Rips computation would enumerate too many simplices."""


@dataclass(frozen=True)
class Edge:
    """An undirected edge (i < j) with its length and filtration rank."""

    i: int
    j: int
    length: float
    rank: int


@dataclass(frozen=True)
class PersistenceFeature:
    """One (birth, death) interval; ``death == math.inf`` marks an essential feature."""

    birth: float
    death: float
    dim: int

    def __post_init__(self):
        if self.birth < 0:
            raise ValueError(f"birth must be >= 0, got {self.birth}")
        if self.death < self.birth:
            raise ValueError(f"death {self.death} < birth {self.birth}")

    @property
    def essential(self) -> bool:
        return math.isinf(self.death)


@dataclass(frozen=True)
class PersistenceDiagram:
    """Multiset of persistence features up to ``max_dim``."""

    features: tuple
    max_dim: int

    def in_dim(self, dim: int) -> tuple:
        return tuple(f for f in self.features if f.dim == dim)


@dataclass(frozen=True)
class PersistencePairing:
    """Creator/destroyer records, one per finite feature, in matching order.

    For dimension 0 each pair is ``(creator_vertex, (i, j))`` where (i, j)
    is the merging edge.
    """

    pairs: tuple

    def destroyer_array(self) -> np.ndarray:
        """Destroyer edges as an int array of shape (k, 2)."""
        if not self.pairs:
            return np.empty((0, 2), dtype=np.intp)
        return np.array([d for _, d in self.pairs], dtype=np.intp)


def sorted_edge_filtration(m: DistanceMatrix) -> list:
    """All n(n-1)/2 edges sorted by (length, i, j) with ranks assigned."""
    n = m.n
    if n < 2:
        return []
    iu, ju = np.triu_indices(n, k=1)
    lengths = m.entries[iu, ju]
    order = np.lexsort((ju, iu, lengths))
    return [
        Edge(int(iu[k]), int(ju[k]), float(lengths[k]), rank)
        for rank, k in enumerate(order)
    ]


class _UnionFind:
    """Union-find keeping the smallest vertex index as each component's root."""

    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        p = self.parent
        while p[x] != x:
            p[x] = p[p[x]]
            x = p[x]
        return x

    def union(self, a: int, b: int) -> int:
        """Merge the components of roots a, b; returns the younger (absorbed) root."""
        elder, younger = (a, b) if a < b else (b, a)
        self.parent[younger] = elder
        return younger


def h0_persistence(m: DistanceMatrix):
    """Dimension-0 persistence with pairing via a Kruskal-style sweep.

    Every edge that merges two components emits a finite feature
    (birth 0, death = edge length). The creator is the root vertex of the
    younger component (the one whose root has the larger index); the
    destroyer is the edge itself. One essential feature remains.

    Returns ``(PersistenceDiagram, PersistencePairing)``.
    """
    n = m.n
    uf = _UnionFind(n)
    finite = []
    pairs = []
    if n > 1:
        iu, ju = np.triu_indices(n, k=1)
        lengths = m.entries[iu, ju]
        order = np.lexsort((ju, iu, lengths))
        merges = 0
        for k in order:
            i = int(iu[k])
            j = int(ju[k])
            ri = uf.find(i)
            rj = uf.find(j)
            if ri == rj:
                continue
            creator = uf.union(ri, rj)
            finite.append(PersistenceFeature(0.0, float(lengths[k]), 0))
            pairs.append((creator, (i, j)))
            merges += 1
            if merges == n - 1:
                break
    features = tuple(finite) + (PersistenceFeature(0.0, ESSENTIAL, 0),)
    return PersistenceDiagram(features, max_dim=0), PersistencePairing(tuple(pairs))


def _count_simplices(entries: np.ndarray, max_scale: float, top_dim: int, limit: int) -> int:
    """Count qualifying simplices, stopping once the count exceeds ``limit``."""
    n = entries.shape[0]
    count = n  # vertices always qualify
    for k in range(1, top_dim + 1):
        for verts in combinations(range(n), k + 1):
            if _diameter(entries, verts) <= max_scale:
                count += 1
                if count > limit:
                    return count
    return count


def _diameter(entries: np.ndarray, verts) -> float:
    diam = 0.0
    for a, b in combinations(verts, 2):
        v = entries[a, b]
        if v > diam:
            diam = v
    return diam


def rips_persistence(
    m: DistanceMatrix,
    max_dim: int,
    max_scale: float = math.inf,
    budget: int = 5_000_000,
) -> PersistenceDiagram:
    """General-dimension persistence by boundary-matrix reduction.

    Enumerates all simplices of dimension <= max_dim + 1 with diameter
    <= max_scale, orders them by (diameter, dimension, vertex tuple), and
    reduces the boundary matrix over the two-element field with
    left-to-right column additions. Zero-persistence pairs are dropped.

    Raises SimplexBudgetError when more than ``budget`` simplices would be
    required.
    """
    if max_dim < 1:
        raise ValueError(f"max_dim must be >= 1, got {max_dim}")
    entries = m.entries
    n = m.n
    top_dim = max_dim + 1

    worst_case = sum(math.comb(n, k + 1) for k in range(top_dim + 1))
    if worst_case > budget:
        required = _count_simplices(entries, max_scale, top_dim, budget)
        if required > budget:
            raise SimplexBudgetError(
                f"simplex budget exceeded: at least {required} simplices "
                f"required, {budget} allowed"
            )

    simplices = [((v,), 0.0) for v in range(n)]
    for k in range(1, top_dim + 1):
        for verts in combinations(range(n), k + 1):
            diam = _diameter(entries, verts)
            if diam <= max_scale:
                simplices.append((verts, diam))
    simplices.sort(key=lambda sd: (sd[1], len(sd[0]), sd[0]))

    index_of = {verts: idx for idx, (verts, _) in enumerate(simplices)}
    diam_of = [d for _, d in simplices]
    dim_of = [len(v) - 1 for v, _ in simplices]

    # Standard reduction: repeatedly cancel each column's largest face index.
    reduced = {}
    pivot_owner = {}
    pair_of = {}
    positive = []
    for j, (verts, _) in enumerate(simplices):
        if len(verts) == 1:
            positive.append(j)
            continue
        col = set()
        for face in combinations(verts, len(verts) - 1):
            col.add(index_of[face])
        while col:
            low = max(col)
            owner = pivot_owner.get(low)
            if owner is None:
                break
            col ^= reduced[owner]
        if col:
            low = max(col)
            pivot_owner[low] = j
            reduced[j] = col
            pair_of[low] = j
        else:
            positive.append(j)

    features = []
    for creator in positive:
        dim = dim_of[creator]
        if dim > max_dim:
            continue
        destroyer = pair_of.get(creator)
        if destroyer is None:
            features.append(PersistenceFeature(diam_of[creator], ESSENTIAL, dim))
        else:
            birth = diam_of[creator]
            death = diam_of[destroyer]
            if death > birth:
                features.append(PersistenceFeature(birth, death, dim))
    features.sort(key=lambda f: (f.dim, f.birth, f.death))
    return PersistenceDiagram(tuple(features), max_dim=max_dim)


def betti_counts(d: PersistenceDiagram, scale: float) -> dict:
    """Features alive at ``scale``: birth <= scale < death, per dimension.

    Dimensions with no live feature are omitted.
    """
    if scale < 0:
        raise ValueError(f"scale must be >= 0, got {scale}")
    counts = {}
    for f in d.features:
        if f.birth <= scale < f.death:
            counts[f.dim] = counts.get(f.dim, 0) + 1
    return dict(sorted(counts.items()))


def _format_value(x: float) -> str:
    if math.isinf(x):
        return "inf"
    return format(x, ".12g")


def write_diagram(d: PersistenceDiagram, fh) -> None:
    """Serialize one feature per line as ``dim birth death``, sorted by (dim, birth, death)."""
    for f in sorted(d.features, key=lambda f: (f.dim, f.birth, f.death)):
        fh.write(f"{f.dim} {_format_value(f.birth)} {_format_value(f.death)}\n")


def read_diagram(path) -> PersistenceDiagram:
    """Parse a diagram file written by :func:`write_diagram`.

    Blank lines and lines starting with ``#`` are ignored.
    """
    features = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = stripped.split()
            if len(parts) != 3:
                raise ValueError(
                    f"{path}: line {lineno}: expected 'dim birth death', got {stripped!r}"
                )
            try:
                dim = int(parts[0])
                birth = float(parts[1])
                death = float(parts[2])
            except ValueError:
                raise ValueError(
                    f"{path}: line {lineno}: non-numeric feature {stripped!r}"
                ) from None
            if dim < 0:
                raise ValueError(f"{path}: line {lineno}: negative dimension")
            features.append(PersistenceFeature(birth, death, dim))
    features.sort(key=lambda f: (f.dim, f.birth, f.death))
    max_dim = max((f.dim for f in features), default=0)
    return PersistenceDiagram(tuple(features), max_dim=max_dim)
