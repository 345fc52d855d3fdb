"""Point-cloud containers, Euclidean distance matrices, and CSV ingestion.

All arithmetic is 64-bit floating point. Both containers are immutable:
their arrays are marked read-only so values can be shared freely across
threads.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform


class PointCloudError(ValueError):
    """Invalid point-cloud data or file contents."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class PointCloud:
    """An ordered set of ``n`` points in ``d``-dimensional Euclidean space."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2:
            raise PointCloudError(f"points must be a 2-D array, got ndim={pts.ndim}")
        if pts.shape[0] < 1 or pts.shape[1] < 1:
            raise PointCloudError(f"need n >= 1 and d >= 1, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise PointCloudError("points contain NaN or Inf")
        object.__setattr__(self, "points", _frozen(pts))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric matrix of pairwise distances with a zero diagonal."""

    entries: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise PointCloudError(f"entries must be square, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise PointCloudError("distance entries contain NaN or Inf")
        if np.any(m < 0):
            raise PointCloudError("distance entries must be non-negative")
        if np.any(np.diagonal(m) != 0.0):
            raise PointCloudError("distance matrix diagonal must be zero")
        if not np.array_equal(m, m.T):
            raise PointCloudError("distance matrix must be symmetric")
        object.__setattr__(self, "entries", _frozen(m))

    @property
    def n(self) -> int:
        return self.entries.shape[0]


def pairwise_distances(cloud: PointCloud) -> DistanceMatrix:
    """Euclidean distance between every pair of points in the cloud."""
    if cloud.n == 1:
        return DistanceMatrix(np.zeros((1, 1)))
    return DistanceMatrix(squareform(pdist(cloud.points, metric="euclidean")))


def load_point_cloud(path, format: str = "csv") -> PointCloud:
    """Read a point cloud from a CSV file, one comma-separated point per row.

    Lines starting with ``#`` and blank lines are skipped. Every data row
    must carry the same number of numeric fields. Errors report the
    offending row (and column where applicable), 1-based.
    """
    if format != "csv":
        raise PointCloudError(f"unsupported format {format!r}, only 'csv'")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise PointCloudError(f"cannot read {path}: {exc}") from exc

    rows = []
    width = None
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = [f.strip() for f in stripped.split(",")]
        if width is None:
            width = len(fields)
        elif len(fields) != width:
            raise PointCloudError(
                f"{path}: ragged row at line {lineno} "
                f"(expected {width} fields, got {len(fields)})"
            )
        row = []
        for col, field in enumerate(fields, start=1):
            try:
                row.append(float(field))
            except ValueError:
                raise PointCloudError(
                    f"{path}: non-numeric field {field!r} at line {lineno}, column {col}"
                ) from None
        rows.append(row)

    if not rows:
        raise PointCloudError(f"{path}: empty file (no data rows)")
    return PointCloud(np.array(rows, dtype=np.float64))


def flatten_inputs(raw) -> PointCloud:
    """Flatten same-shaped numeric records row-major into one point each."""
    records = [np.asarray(r, dtype=np.float64) for r in raw]
    if not records:
        raise PointCloudError("no records to flatten")
    shape = records[0].shape
    for idx, rec in enumerate(records):
        if rec.shape != shape:
            raise PointCloudError(
                f"shape mismatch at record {idx}: expected {shape}, got {rec.shape}"
            )
    flat = np.stack([rec.reshape(-1) for rec in records])
    if flat.shape[1] == 0:
        raise PointCloudError("records are empty")
    return PointCloud(flat)
