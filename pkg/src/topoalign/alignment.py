"""Invariant structure alignment between an input cloud and its embedding.

The loss compares pairing-selected entries of the two pairwise distance
matrices: for each dimension-0 destroyer edge of either space, the squared
difference between the corresponding entries is accumulated, and each
side's sum is halved. Pairings are treated as locally constant when
differentiating, so gradients flow only through the latent distances.
"""

from dataclasses import dataclass

import numpy as np

from .persistence import PersistencePairing, h0_persistence
from .pointcloud import DistanceMatrix, PointCloud, pairwise_distances


@dataclass(frozen=True)
class IsaContext:
    """Distance matrices and dimension-0 pairings of both spaces."""

    m_x: DistanceMatrix
    m_z: DistanceMatrix
    gamma_x: PersistencePairing
    gamma_z: PersistencePairing

    def __post_init__(self):
        if self.m_x.n != self.m_z.n:
            raise ValueError(
                f"matrices disagree on n: {self.m_x.n} vs {self.m_z.n}"
            )
        n = self.m_x.n
        for pairing in (self.gamma_x, self.gamma_z):
            for _, (i, j) in pairing.pairs:
                if not (0 <= i < j < n):
                    raise ValueError(f"destroyer edge ({i}, {j}) out of range for n={n}")


def _selected_sq_diff(m_a: np.ndarray, m_b: np.ndarray, edges: np.ndarray) -> float:
    if edges.shape[0] == 0:
        return 0.0
    i, j = edges[:, 0], edges[:, 1]
    diff = m_a[i, j] - m_b[i, j]
    return float(np.sum(diff * diff))


def isa_loss(ctx: IsaContext) -> float:
    """Half the summed squared differences over each pairing's selected entries."""
    mx = ctx.m_x.entries
    mz = ctx.m_z.entries
    ex = ctx.gamma_x.destroyer_array()
    ez = ctx.gamma_z.destroyer_array()
    return 0.5 * _selected_sq_diff(mx, mz, ex) + 0.5 * _selected_sq_diff(mz, mx, ez)


def isa_loss_grad(ctx: IsaContext, z: PointCloud) -> np.ndarray:
    """Exact gradient of :func:`isa_loss` with respect to the latent coordinates.

    Requires ``ctx.m_z == pairwise_distances(z)``. Pairings are held fixed.
    A selected edge between two identical latent points contributes zero.
    """
    mx = ctx.m_x.entries
    mz = ctx.m_z.entries
    pts = z.points
    if pts.shape[0] != ctx.m_z.n:
        raise ValueError(f"cloud has n={pts.shape[0]} but matrix has n={ctx.m_z.n}")
    grad = np.zeros_like(pts)
    edges = np.concatenate(
        [ctx.gamma_x.destroyer_array(), ctx.gamma_z.destroyer_array()], axis=0
    )
    for i, j in edges:
        dist = mz[i, j]
        if dist == 0.0:
            continue
        coef = (dist - mx[i, j]) / dist
        delta = pts[i] - pts[j]
        grad[i] += coef * delta
        grad[j] -= coef * delta
    return grad


def structure_discrepancy(x: PointCloud, z: PointCloud) -> float:
    """Alignment loss computed from scratch for two clouds of equal size."""
    if x.n != z.n:
        raise ValueError(f"clouds disagree on n: {x.n} vs {z.n}")
    m_x = pairwise_distances(x)
    m_z = pairwise_distances(z)
    _, gamma_x = h0_persistence(m_x)
    _, gamma_z = h0_persistence(m_z)
    return isa_loss(IsaContext(m_x, m_z, gamma_x, gamma_z))
