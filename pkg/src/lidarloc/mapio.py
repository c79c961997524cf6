"""Binary map persistence and PLY export.

The map format is custom so round-trips are bit-exact and golden-file
tests stay possible. Layout (all little-endian):

    magic (6 bytes, "VXLMAP"), version (uint16), flags (uint8, bit 0 set
    when labels are present), 1 pad byte, voxel resolution (float64),
    point count (uint64), then count x 3 float32 coordinates, then
    optionally count x uint16 labels.

Coordinates are stored as float32, which quantizes sub-micrometer detail;
reading back a written file reproduces the stored floats exactly. For
external viewers an ASCII PLY export is provided.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import CorruptFileError, UnsupportedFormatError
from .geometry import PointCloud
from .mapgen import MapPair

MAGIC = b"VXLMAP"
VERSION = 1
_HEADER = struct.Struct("<6sHBxdQ")
HEADER_SIZE = _HEADER.size
_FLAG_LABELS = 0x01

FEATURE_SUFFIX = ".feature.map"
LASTING_SUFFIX = ".lasting.map"


def write_map(path: str | Path, cloud: PointCloud, resolution: float) -> None:
    """Write one voxelized labeled map to ``path``."""
    if resolution <= 0.0:
        raise ValueError("resolution must be positive")
    flags = 0
    payload = [np.asarray(cloud.points, dtype="<f4").tobytes()]
    if cloud.labels is not None:
        if len(cloud) and (cloud.labels.min() < 0 or cloud.labels.max() > 0xFFFF):
            raise ValueError("map labels must fit in uint16")
        flags |= _FLAG_LABELS
        payload.append(cloud.labels.astype("<u2").tobytes())
    header = _HEADER.pack(MAGIC, VERSION, flags, resolution, len(cloud))
    Path(path).write_bytes(header + b"".join(payload))


def read_map(path: str | Path) -> tuple[PointCloud, float]:
    """Read a map file back; returns (cloud, voxel resolution)."""
    data = Path(path).read_bytes()
    if len(data) < HEADER_SIZE:
        raise CorruptFileError(f"{path}: file shorter than the header")
    magic, version, flags, resolution, count = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise UnsupportedFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedFormatError(f"{path}: unsupported version {version}")

    has_labels = bool(flags & _FLAG_LABELS)
    expected = HEADER_SIZE + count * (12 + (2 if has_labels else 0))
    if len(data) != expected:
        raise CorruptFileError(
            f"{path}: expected {expected} bytes for {count} points, got {len(data)}"
        )

    offset = HEADER_SIZE
    points = np.frombuffer(data, dtype="<f4", count=count * 3, offset=offset)
    points = points.reshape(-1, 3).astype(np.float64)
    labels = None
    if has_labels:
        offset += count * 12
        labels = np.frombuffer(data, dtype="<u2", count=count, offset=offset)
        labels = labels.astype(np.int64)
    return PointCloud(points, labels), float(resolution)


def write_ply(path: str | Path, cloud: PointCloud) -> None:
    """Export a map as ASCII PLY for external viewers."""
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(cloud)}",
        "property float x",
        "property float y",
        "property float z",
    ]
    if cloud.labels is not None:
        lines.append("property ushort label")
    lines.append("end_header")
    for i in range(len(cloud)):
        x, y, z = cloud.points[i]
        row = f"{x:.6f} {y:.6f} {z:.6f}"
        if cloud.labels is not None:
            row += f" {int(cloud.labels[i])}"
        lines.append(row)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def map_pair_paths(prefix: str | Path) -> tuple[Path, Path]:
    """(feature map path, long-lasting map path) for a map prefix."""
    prefix = str(prefix)
    return Path(prefix + FEATURE_SUFFIX), Path(prefix + LASTING_SUFFIX)


def write_map_pair(prefix: str | Path, maps: MapPair) -> tuple[Path, Path]:
    feature_path, lasting_path = map_pair_paths(prefix)
    write_map(feature_path, maps.feature_map, maps.voxel_resolution)
    write_map(lasting_path, maps.long_lasting_map, maps.voxel_resolution)
    return feature_path, lasting_path


def read_map_pair(prefix: str | Path) -> MapPair:
    """Load both maps written by :func:`write_map_pair`.

    Build metadata (keyframe poses, stats) is not persisted; the returned
    pair carries only the clouds and the voxel resolution.
    """
    feature_path, lasting_path = map_pair_paths(prefix)
    feature_map, feature_res = read_map(feature_path)
    lasting_map, lasting_res = read_map(lasting_path)
    if feature_res != lasting_res:
        raise CorruptFileError(
            f"map pair {prefix}: resolutions differ ({feature_res} vs {lasting_res})"
        )
    return MapPair(
        feature_map=feature_map,
        long_lasting_map=lasting_map,
        voxel_resolution=feature_res,
    )
