"""Core geometric types and operations for LiDAR point cloud processing.

Conventions used throughout the package:

- Points are (N, 3) float64 arrays in meters, sensor or map frame.
- A rigid transform maps points from its "source" frame into its
  "destination" frame via ``p' = R @ p + t``.
- Voxel grids are anchored at the world origin; the key of a point at
  resolution ``r`` is ``floor(p / r)`` per component (mathematical floor,
  so negative coordinates round toward -inf).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_ROTATION_TOL = 1e-9
# Drift above this is repairable float error from long composition chains;
# anything worse is treated as "not a rotation".
_ROTATION_DRIFT_TOL = 1e-12
_ROTATION_REJECT_TOL = 1e-6
_MIN_RANGE = 1e-6  # points closer to the sensor origin have undefined angles


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class PointCloud:
    """Immutable 3D point cloud with optional per-point labels and intensity.

    Parameters
    ----------
    points : (N, 3) array-like
        Cartesian coordinates in meters. Must be finite.
    labels : (N,) array-like of int, optional
        Semantic category IDs, one per point.
    intensity : (N,) array-like of float, optional
        Unitless reflectance values, one per point.
    """

    points: np.ndarray
    labels: np.ndarray | None = None
    intensity: np.ndarray | None = None

    def __post_init__(self) -> None:
        pts = np.array(self.points, dtype=np.float64, copy=True)
        if pts.size == 0:
            pts = pts.reshape(0, 3)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must have shape (N, 3), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points contain NaN or Inf coordinates")
        object.__setattr__(self, "points", _readonly(pts))

        if self.labels is not None:
            lab = np.array(self.labels, copy=True).reshape(-1).astype(np.int64)
            if lab.shape[0] != pts.shape[0]:
                raise ValueError(
                    f"labels length {lab.shape[0]} != point count {pts.shape[0]}"
                )
            object.__setattr__(self, "labels", _readonly(lab))

        if self.intensity is not None:
            inten = np.array(self.intensity, dtype=np.float64, copy=True).reshape(-1)
            if inten.shape[0] != pts.shape[0]:
                raise ValueError(
                    f"intensity length {inten.shape[0]} != point count {pts.shape[0]}"
                )
            object.__setattr__(self, "intensity", _readonly(inten))

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def has_labels(self) -> bool:
        return self.labels is not None

    def select(self, index: np.ndarray) -> "PointCloud":
        """Return the sub-cloud at ``index`` (integer indices or boolean mask)."""
        return PointCloud(
            self.points[index],
            None if self.labels is None else self.labels[index],
            None if self.intensity is None else self.intensity[index],
        )

    def transform(self, pose: "RigidTransform") -> "PointCloud":
        """Return a copy with coordinates mapped through ``pose``.

        Labels and intensity are carried through unchanged.
        """
        return PointCloud(pose.apply(self.points), self.labels, self.intensity)


def merge_clouds(clouds: "list[PointCloud] | tuple[PointCloud, ...]") -> PointCloud:
    """Concatenate clouds; labels/intensity are kept only if all inputs have them."""
    clouds = [c for c in clouds]
    if not clouds:
        return PointCloud(np.empty((0, 3)))
    points = np.concatenate([c.points for c in clouds])
    labels = None
    if all(c.labels is not None for c in clouds):
        labels = np.concatenate([c.labels for c in clouds])
    intensity = None
    if all(c.intensity is not None for c in clouds):
        intensity = np.concatenate([c.intensity for c in clouds])
    return PointCloud(points, labels, intensity)


@dataclass(frozen=True)
class RigidTransform:
    """SE(3) rigid transform: a 3x3 rotation plus a translation in meters.

    The rotation is validated to be orthonormal with positive determinant
    (max deviation of R @ R.T from identity at most 1e-9).
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        rot = np.array(self.rotation, dtype=np.float64, copy=True)
        tra = np.array(self.translation, dtype=np.float64, copy=True).reshape(3)
        if rot.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {rot.shape}")
        if not (np.all(np.isfinite(rot)) and np.all(np.isfinite(tra))):
            raise ValueError("transform contains NaN or Inf entries")
        err = np.abs(rot @ rot.T - np.eye(3)).max()
        if err > _ROTATION_REJECT_TOL:
            raise ValueError(f"rotation is not orthonormal (|R R^T - I| = {err:.3e})")
        if np.linalg.det(rot) < 0.0:
            raise ValueError("rotation has negative determinant (reflection)")
        if err > _ROTATION_DRIFT_TOL:
            # Accumulated float error from long composition chains; snap back
            # to the nearest rotation so the 1e-9 invariant always holds.
            rot = project_to_rotation(rot)
        object.__setattr__(self, "rotation", _readonly(rot))
        object.__setattr__(self, "translation", _readonly(tra))

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "RigidTransform":
        """Build from a 4x4 (or 3x4) homogeneous matrix."""
        m = np.asarray(matrix, dtype=np.float64)
        if m.shape not in ((4, 4), (3, 4)):
            raise ValueError(f"expected a 4x4 or 3x4 matrix, got {m.shape}")
        return cls(m[:3, :3], m[:3, 3])

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """Return the transform applying ``other`` first, then ``self``."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return self.compose(other)

    def inverse(self) -> "RigidTransform":
        rot_t = self.rotation.T
        return RigidTransform(rot_t, -rot_t @ self.translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map one point (3,) or a batch (N, 3) into the destination frame."""
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim == 1:
            return self.rotation @ pts + self.translation
        return pts @ self.rotation.T + self.translation


def rotation_angle(a: np.ndarray, b: np.ndarray | None = None) -> float:
    """Geodesic angle in radians of rotation ``a``, or between ``a`` and ``b``.

    Equals acos((trace - 1) / 2) of the relative rotation, evaluated in the
    atan2 form so angles near zero are resolved to machine precision
    instead of the ~1e-8 floor of the acos expression.
    """
    rel = np.asarray(a) if b is None else np.asarray(a).T @ np.asarray(b)
    cos = (np.trace(rel) - 1.0) / 2.0
    skew = 0.5 * np.array(
        [rel[2, 1] - rel[1, 2], rel[0, 2] - rel[2, 0], rel[1, 0] - rel[0, 1]]
    )
    return float(np.arctan2(np.linalg.norm(skew), cos))


def axis_angle_rotation(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix for a rotation of ``angle`` radians about ``axis``."""
    u = np.asarray(axis, dtype=np.float64).reshape(3)
    norm = np.linalg.norm(u)
    if norm == 0.0:
        raise ValueError("rotation axis must be non-zero")
    u = u / norm
    k = np.array([[0.0, -u[2], u[1]], [u[2], 0.0, -u[0]], [-u[1], u[0], 0.0]])
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def project_to_rotation(matrix: np.ndarray) -> np.ndarray:
    """Nearest rotation matrix (Frobenius norm) to an approximate one."""
    u, _, vt = np.linalg.svd(np.asarray(matrix, dtype=np.float64))
    rot = u @ vt
    if np.linalg.det(rot) < 0.0:
        u = u.copy()
        u[:, -1] = -u[:, -1]
        rot = u @ vt
    return rot


def voxel_keys(points: np.ndarray, resolution: float) -> np.ndarray:
    """Integer voxel coordinates ``floor(p / resolution)`` for each point."""
    return np.floor(np.asarray(points, dtype=np.float64) / resolution).astype(np.int64)


def voxel_downsample(cloud: PointCloud, resolution: float) -> PointCloud:
    """Downsample to one point per occupied voxel.

    Each output point is the arithmetic centroid of its voxel's points.
    When labels are present the output label is the majority label in the
    voxel, ties broken by the smallest label ID. Intensity, when present,
    is averaged. Output points are ordered by voxel key (lexicographic),
    which makes the result deterministic.

    Parameters
    ----------
    cloud : PointCloud
    resolution : float
        Voxel edge length in meters; must be positive.
    """
    if resolution <= 0.0:
        raise ValueError(f"resolution must be positive, got {resolution}")
    n = len(cloud)
    if n == 0:
        return cloud

    keys = voxel_keys(cloud.points, resolution)
    _, inverse, counts = np.unique(
        keys, axis=0, return_inverse=True, return_counts=True
    )
    inverse = inverse.reshape(-1)
    n_voxels = counts.shape[0]

    centroids = np.empty((n_voxels, 3))
    for axis in range(3):
        centroids[:, axis] = np.bincount(
            inverse, weights=cloud.points[:, axis], minlength=n_voxels
        )
    centroids /= counts[:, None]

    labels = None
    if cloud.labels is not None:
        pairs = np.stack([inverse, cloud.labels], axis=1)
        uniq_pairs, pair_counts = np.unique(pairs, axis=0, return_counts=True)
        # Majority per voxel: sort by (voxel, count desc, label asc), take first.
        order = np.lexsort((uniq_pairs[:, 1], -pair_counts, uniq_pairs[:, 0]))
        ordered = uniq_pairs[order]
        _, first = np.unique(ordered[:, 0], return_index=True)
        labels = ordered[first, 1]

    intensity = None
    if cloud.intensity is not None:
        sums = np.bincount(inverse, weights=cloud.intensity, minlength=n_voxels)
        intensity = sums / counts

    return PointCloud(centroids, labels, intensity)


@dataclass(frozen=True)
class RangeImageSpec:
    """Row/column geometry of a spinning-LiDAR range image.

    Rows bin the elevation angle linearly over ``fov_deg`` (degrees, low to
    high); columns bin the azimuth over [-pi, pi). Defaults match a 64-beam
    sensor with a 26.9 degree vertical field of view.
    """

    rows: int = 64
    cols: int = 2048
    fov_deg: tuple[float, float] = (-24.9, 2.0)

    def __post_init__(self) -> None:
        if self.rows < 2 or self.cols < 2:
            raise ValueError("rows and cols must both be at least 2")
        lo, hi = self.fov_deg
        if not lo < hi:
            raise ValueError(f"fov_deg must be increasing, got {self.fov_deg}")


@dataclass(frozen=True)
class OrganizedScan:
    """Row/column index over a scan: grid[i, j] is a point index or -1."""

    rows: int
    cols: int
    grid: np.ndarray
    source_size: int

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid)
        if grid.shape != (self.rows, self.cols):
            raise ValueError("grid shape does not match rows/cols")
        object.__setattr__(self, "grid", _readonly(np.array(grid, dtype=np.int64)))

    def occupied_indices(self) -> np.ndarray:
        """Indices of the source points stored anywhere in the grid."""
        return self.grid[self.grid >= 0]


def organize(
    cloud: PointCloud,
    rows: int = 64,
    cols: int = 2048,
    fov_deg: tuple[float, float] = (-24.9, 2.0),
) -> OrganizedScan:
    """Index a scan by elevation ring and azimuth bin.

    Row ``i = floor((elevation - fov_min) / bin_width)`` with elevation
    ``asin(z / range)``; column ``j = floor(cols * (azimuth + pi) / 2pi)``
    with azimuth ``atan2(y, x)`` wrapped onto [-pi, pi). Points outside the
    vertical field of view are not stored. When several points map to one
    cell the nearest-range point wins (ties by smallest index). Points
    closer than 1e-6 m to the origin are dropped as sensor artifacts.
    """
    spec = RangeImageSpec(rows, cols, fov_deg)  # validates arguments
    grid = np.full((rows, cols), -1, dtype=np.int64)
    n = len(cloud)
    if n == 0:
        return OrganizedScan(rows, cols, grid, 0)

    pts = cloud.points
    ranges = np.linalg.norm(pts, axis=1)
    keep = ranges >= _MIN_RANGE
    idx = np.nonzero(keep)[0]
    if idx.size == 0:
        return OrganizedScan(rows, cols, grid, n)
    pts = pts[idx]
    rng = ranges[idx]

    fov_lo, fov_hi = np.deg2rad(spec.fov_deg[0]), np.deg2rad(spec.fov_deg[1])
    bin_width = (fov_hi - fov_lo) / rows
    elevation = np.arcsin(np.clip(pts[:, 2] / rng, -1.0, 1.0))
    row = np.floor((elevation - fov_lo) / bin_width).astype(np.int64)
    azimuth = np.arctan2(pts[:, 1], pts[:, 0])
    col = np.floor(cols * (azimuth + np.pi) / (2.0 * np.pi)).astype(np.int64) % cols

    in_fov = (row >= 0) & (row < rows)
    idx, row, col, rng = idx[in_fov], row[in_fov], col[in_fov], rng[in_fov]

    # Nearest range per cell, ties broken by smallest point index: sort by
    # (range, index) and keep the first occurrence of each cell. np.unique
    # uses a stable sort when return_index is requested.
    order = np.lexsort((idx, rng))
    cells = row[order] * cols + col[order]
    uniq_cells, first = np.unique(cells, return_index=True)
    grid.flat[uniq_cells] = idx[order][first]
    return OrganizedScan(rows, cols, grid, n)
