"""Readers and writers for KITTI odometry data.

Formats handled:

- scans: ``.bin`` files of little-endian float32 quadruples (x, y, z,
  intensity), so the point count is the file size divided by 16;
- labels: ``.label`` files of little-endian uint32 values whose low 16
  bits are the semantic category (the high 16 bits carry an instance ID
  and are discarded);
- poses: text files with 12 whitespace-separated decimals per line, the
  row-major upper 3x4 of the homogeneous pose matrix;
- calibration: a text file containing a ``Tr:`` line with the 12 numbers
  of the LiDAR-to-camera transform.

KITTI pose files are camera-frame. When a calibration transform Tr is
supplied, poses are conjugated into the LiDAR frame via
``T_lidar = Tr^-1 @ T_cam @ Tr``; skipping this step silently corrupts any
map built from the poses.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CorruptFileError
from .geometry import PointCloud, RigidTransform, project_to_rotation

_SCAN_RECORD_BYTES = 16
_ROTATION_FIX_TOL = 1e-9


def read_scan(path: str | Path) -> PointCloud:
    """Read a KITTI ``.bin`` scan into a point cloud with intensity."""
    data = Path(path).read_bytes()
    if len(data) % _SCAN_RECORD_BYTES != 0:
        raise CorruptFileError(
            f"{path}: size {len(data)} is not a multiple of {_SCAN_RECORD_BYTES}"
        )
    records = np.frombuffer(data, dtype="<f4").reshape(-1, 4)
    try:
        return PointCloud(
            records[:, :3].astype(np.float64),
            intensity=records[:, 3].astype(np.float64),
        )
    except ValueError as exc:
        raise CorruptFileError(f"{path}: {exc}") from None


def write_scan(path: str | Path, cloud: PointCloud) -> None:
    """Write a cloud as a KITTI ``.bin`` scan (zero intensity when absent)."""
    records = np.zeros((len(cloud), 4), dtype="<f4")
    records[:, :3] = cloud.points
    if cloud.intensity is not None:
        records[:, 3] = cloud.intensity
    Path(path).write_bytes(records.tobytes())


def read_labels(path: str | Path, expected_count: int) -> np.ndarray:
    """Read semantic category IDs from a ``.label`` file."""
    data = Path(path).read_bytes()
    if len(data) % 4 != 0:
        raise CorruptFileError(f"{path}: size {len(data)} is not a multiple of 4")
    raw = np.frombuffer(data, dtype="<u4")
    if raw.shape[0] != expected_count:
        raise CorruptFileError(
            f"{path}: {raw.shape[0]} labels but the scan has {expected_count} points"
        )
    return (raw & 0xFFFF).astype(np.int64)


def write_labels(path: str | Path, labels: np.ndarray) -> None:
    """Write semantic IDs as a ``.label`` file (instance bits zero)."""
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() > 0xFFFF):
        raise ValueError("semantic labels must fit in 16 bits")
    Path(path).write_bytes(labels.astype("<u4").tobytes())


def _parse_pose_line(path: str | Path, lineno: int, line: str) -> RigidTransform:
    parts = line.split()
    if len(parts) != 12:
        raise CorruptFileError(
            f"{path}:{lineno}: expected 12 values per pose line, got {len(parts)}"
        )
    try:
        values = np.array([float(v) for v in parts]).reshape(3, 4)
    except ValueError:
        raise CorruptFileError(f"{path}:{lineno}: malformed number") from None
    rotation = values[:, :3]
    # Ground-truth rotations are only approximately orthonormal; project to
    # the nearest rotation whenever they miss the construction tolerance.
    if np.abs(rotation @ rotation.T - np.eye(3)).max() > _ROTATION_FIX_TOL:
        rotation = project_to_rotation(rotation)
    return RigidTransform(rotation, values[:, 3])


def read_poses(
    path: str | Path, calibration: RigidTransform | None = None
) -> list[RigidTransform]:
    """Read a KITTI pose file; optionally conjugate into the LiDAR frame."""
    poses: list[RigidTransform] = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            poses.append(_parse_pose_line(path, lineno, line))
    if calibration is not None:
        calib_inv = calibration.inverse()
        poses = [calib_inv @ pose @ calibration for pose in poses]
    return poses


def write_poses(path: str | Path, poses) -> None:
    """Write poses in KITTI format (12 numbers per line, row-major 3x4)."""
    with open(path, "w", encoding="utf-8") as handle:
        for pose in poses:
            values = pose.matrix()[:3, :].reshape(-1)
            handle.write(" ".join(f"{v:.12e}" for v in values) + "\n")


def read_calibration(path: str | Path) -> RigidTransform:
    """Read the LiDAR-to-camera transform from the ``Tr:`` calibration line."""
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if line.startswith("Tr:") or line.startswith("Tr "):
                return _parse_pose_line(path, lineno, line.split(":", 1)[-1])
    raise CorruptFileError(f"{path}: no 'Tr:' calibration line found")


@dataclass(frozen=True)
class SequenceSource:
    """Lazy view of one KITTI-style sequence directory.

    Frame order is the lexicographic order of the scan files, which matches
    KITTI's zero-padded naming.
    """

    scan_dir: Path
    pose_file: Path
    label_dir: Path | None = None
    calib_file: Path | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "scan_dir", Path(self.scan_dir))
        object.__setattr__(self, "pose_file", Path(self.pose_file))
        if self.label_dir is not None:
            object.__setattr__(self, "label_dir", Path(self.label_dir))
        if self.calib_file is not None:
            object.__setattr__(self, "calib_file", Path(self.calib_file))
        scans = tuple(sorted(self.scan_dir.glob("*.bin")))
        if not scans:
            raise FileNotFoundError(f"no .bin scans found in {self.scan_dir}")
        object.__setattr__(self, "_scans", scans)

    @classmethod
    def from_directory(cls, root: str | Path) -> "SequenceSource":
        """Open a directory laid out as velodyne/, labels/, poses.txt, calib.txt."""
        root = Path(root)
        label_dir = root / "labels"
        calib_file = root / "calib.txt"
        return cls(
            scan_dir=root / "velodyne",
            pose_file=root / "poses.txt",
            label_dir=label_dir if label_dir.is_dir() else None,
            calib_file=calib_file if calib_file.is_file() else None,
        )

    def __len__(self) -> int:
        return len(self._scans)

    def scan_path(self, index: int) -> Path:
        return self._scans[index]

    def point_count(self, index: int) -> int:
        """Point count of one scan, from the file size (no read)."""
        size = self._scans[index].stat().st_size
        if size % _SCAN_RECORD_BYTES != 0:
            raise CorruptFileError(f"{self._scans[index]}: truncated scan file")
        return size // _SCAN_RECORD_BYTES

    def total_point_count(self) -> int:
        return sum(self.point_count(i) for i in range(len(self)))

    def load_poses(self) -> list[RigidTransform]:
        """Poses in the LiDAR frame (conjugated through Tr when present)."""
        calibration = (
            read_calibration(self.calib_file) if self.calib_file is not None else None
        )
        return read_poses(self.pose_file, calibration)

    def load_frame(self, index: int, with_labels: bool = True) -> PointCloud:
        cloud = read_scan(self._scans[index])
        if with_labels and self.label_dir is not None:
            label_path = self.label_dir / (self._scans[index].stem + ".label")
            labels = read_labels(label_path, len(cloud))
            cloud = PointCloud(cloud.points, labels, cloud.intensity)
        return cloud
