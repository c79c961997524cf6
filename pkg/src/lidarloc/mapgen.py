"""Semantic long-lasting map and feature-point map generation.

From a labeled LiDAR sequence with known poses, this module keeps only the
semantically stable categories (buildings, poles, signs, roads, sidewalks,
terrain, tree trunks), extracts sparse vertical-line features (stick-like
objects plus building edge points found on the range image), accumulates
everything in the map frame and voxelizes the result into two maps: a dense
long-lasting map and a compact feature-point map.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .geometry import (
    OrganizedScan,
    PointCloud,
    RangeImageSpec,
    RigidTransform,
    merge_clouds,
    organize,
    voxel_downsample,
)

# SemanticKITTI category IDs. Fences (51) and vegetation (70) are excluded
# on purpose: only the trunk (71) of a tree is stable, its leaves are not.
ROAD, SIDEWALK, BUILDING, TRUNK, TERRAIN, POLE, TRAFFIC_SIGN = (
    40,
    48,
    50,
    71,
    72,
    80,
    81,
)


@dataclass(frozen=True)
class SemanticPolicy:
    """Which semantic category IDs count as long-lasting / stick-like / building."""

    long_lasting_ids: frozenset[int]
    stick_ids: frozenset[int]
    building_id: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "long_lasting_ids", frozenset(self.long_lasting_ids))
        object.__setattr__(self, "stick_ids", frozenset(self.stick_ids))
        if not self.stick_ids <= self.long_lasting_ids:
            raise ValueError("stick_ids must be a subset of long_lasting_ids")
        if self.building_id not in self.long_lasting_ids:
            raise ValueError("building_id must be a long-lasting category")

    @classmethod
    def semantic_kitti(cls) -> "SemanticPolicy":
        """Default policy over the SemanticKITTI label convention."""
        return cls(
            long_lasting_ids=frozenset(
                {ROAD, SIDEWALK, BUILDING, TRUNK, TERRAIN, POLE, TRAFFIC_SIGN}
            ),
            stick_ids=frozenset({POLE, TRAFFIC_SIGN}),
            building_id=BUILDING,
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "SemanticPolicy":
        """Load a policy from a JSON file.

        Expected keys: ``long_lasting_ids`` (list of int), ``stick_ids``
        (list of int), ``building_id`` (int).
        """
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
        try:
            return cls(
                long_lasting_ids=frozenset(int(i) for i in data["long_lasting_ids"]),
                stick_ids=frozenset(int(i) for i in data["stick_ids"]),
                building_id=int(data["building_id"]),
            )
        except KeyError as missing:
            raise ValueError(f"policy file {path} is missing key {missing}") from None


@dataclass(frozen=True)
class MapStats:
    """Compression ratios of a map build, all in [0, 1]."""

    frame_fraction: float
    feature_fraction: float
    long_lasting_fraction: float

    def __post_init__(self) -> None:
        for name in ("frame_fraction", "feature_fraction", "long_lasting_fraction"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")


@dataclass(frozen=True)
class MapPair:
    """A feature-point map plus a long-lasting map with build metadata."""

    feature_map: PointCloud
    long_lasting_map: PointCloud
    voxel_resolution: float
    keyframe_poses: tuple[RigidTransform, ...] = ()
    stats: MapStats | None = None

    def __post_init__(self) -> None:
        if self.voxel_resolution <= 0.0:
            raise ValueError("voxel_resolution must be positive")
        if len(self.feature_map) > len(self.long_lasting_map):
            raise ValueError(
                "feature map cannot have more points than the long-lasting map"
            )
        object.__setattr__(self, "keyframe_poses", tuple(self.keyframe_poses))


def _require_labels(cloud: PointCloud) -> np.ndarray:
    if cloud.labels is None:
        raise ValueError("cloud must carry per-point semantic labels")
    return cloud.labels


def filter_long_lasting(cloud: PointCloud, policy: SemanticPolicy) -> PointCloud:
    """Keep exactly the points of long-lasting categories, order preserved."""
    labels = _require_labels(cloud)
    mask = np.isin(labels, sorted(policy.long_lasting_ids))
    return cloud.select(mask)


def extract_stick_points(cloud: PointCloud, policy: SemanticPolicy) -> PointCloud:
    """Points of stick-like categories (poles, traffic signs/lights)."""
    labels = _require_labels(cloud)
    mask = np.isin(labels, sorted(policy.stick_ids))
    return cloud.select(mask)


def extract_building_edges(
    cloud: PointCloud,
    organized: OrganizedScan,
    policy: SemanticPolicy,
    angle_threshold: float = 150.0,
) -> PointCloud:
    """Vertical building edge points on the range image.

    A building-labeled point at cell (i, j) is an edge point when both
    horizontal neighbors (i, j-1) and (i, j+1) exist and are building
    points, and the 3D interior angle at the point between the two
    neighbor directions is below ``angle_threshold`` degrees. Columns wrap
    around the 360 degree seam. Flat wall samples have interior angles near
    180 degrees and are never extracted.
    """
    labels = _require_labels(cloud)
    if not 0.0 < angle_threshold < 180.0:
        raise ValueError("angle_threshold must be in (0, 180) degrees")
    if organized.source_size != len(cloud):
        raise ValueError("organized index was built from a different cloud")
    grid = organized.grid
    if grid.max(initial=-1) >= len(cloud):
        raise ValueError("organized index refers to points outside the cloud")

    left = np.roll(grid, 1, axis=1)
    right = np.roll(grid, -1, axis=1)

    def is_building(indices: np.ndarray) -> np.ndarray:
        ok = indices >= 0
        out = np.zeros_like(ok)
        out[ok] = labels[indices[ok]] == policy.building_id
        return out

    candidate = is_building(grid) & is_building(left) & is_building(right)
    center_idx = grid[candidate]
    left_idx = left[candidate]
    right_idx = right[candidate]

    center = cloud.points[center_idx]
    to_left = cloud.points[left_idx] - center
    to_right = cloud.points[right_idx] - center
    norm_l = np.linalg.norm(to_left, axis=1)
    norm_r = np.linalg.norm(to_right, axis=1)
    valid = (norm_l > 1e-12) & (norm_r > 1e-12)

    cos = np.full(center_idx.shape, 1.0)
    cos[valid] = np.sum(to_left[valid] * to_right[valid], axis=1) / (
        norm_l[valid] * norm_r[valid]
    )
    angle = np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))
    edge_idx = center_idx[valid & (angle < angle_threshold)]
    return cloud.select(np.sort(edge_idx))


def select_keyframes(
    poses: Sequence[RigidTransform], min_distance: float
) -> list[int]:
    """Greedy minimum-travel-distance frame selection.

    Frame 0 is always selected; every later frame is selected iff its
    translation is at least ``min_distance`` from the most recently
    selected frame's translation.
    """
    if min_distance < 0.0:
        raise ValueError("min_distance must be non-negative")
    selected: list[int] = []
    last: np.ndarray | None = None
    for index, pose in enumerate(poses):
        if last is None or np.linalg.norm(pose.translation - last) >= min_distance:
            selected.append(index)
            last = pose.translation
    return selected


def _frame_features(
    cloud: PointCloud,
    policy: SemanticPolicy,
    edge_extraction: bool,
    angle_threshold: float,
    range_image: RangeImageSpec,
) -> PointCloud:
    sticks = extract_stick_points(cloud, policy)
    if edge_extraction:
        organized = organize(
            cloud, range_image.rows, range_image.cols, range_image.fov_deg
        )
        buildings = extract_building_edges(cloud, organized, policy, angle_threshold)
    else:
        buildings = cloud.select(cloud.labels == policy.building_id)
    return merge_clouds([sticks, buildings])


def build_maps_lazy(
    poses: Sequence[RigidTransform],
    frame_loader: Callable[[int], PointCloud],
    total_points: int,
    policy: SemanticPolicy | None = None,
    min_distance: float = 5.0,
    resolution: float = 0.2,
    edge_extraction: bool = True,
    angle_threshold: float = 150.0,
    range_image: RangeImageSpec = RangeImageSpec(),
) -> MapPair:
    """Map build that loads only the selected keyframes.

    ``frame_loader(i)`` must return the labeled cloud of frame ``i``;
    ``total_points`` is the raw point count over all frames (for the
    stats). Full sequences never have to fit in memory at once.
    """
    if not poses:
        raise ValueError("at least one frame is required")
    if resolution <= 0.0:
        raise ValueError("resolution must be positive")
    if policy is None:
        policy = SemanticPolicy.semantic_kitti()

    keyframes = select_keyframes(poses, min_distance)
    lasting_parts: list[PointCloud] = []
    feature_parts: list[PointCloud] = []
    for index in keyframes:
        cloud = frame_loader(index)
        pose = poses[index]
        lasting_parts.append(filter_long_lasting(cloud, policy).transform(pose))
        features = _frame_features(
            cloud, policy, edge_extraction, angle_threshold, range_image
        )
        feature_parts.append(features.transform(pose))

    lasting_map = voxel_downsample(merge_clouds(lasting_parts), resolution)
    feature_map = voxel_downsample(merge_clouds(feature_parts), resolution)

    stats = MapStats(
        frame_fraction=len(keyframes) / len(poses),
        feature_fraction=len(feature_map) / total_points if total_points else 0.0,
        long_lasting_fraction=(
            len(lasting_map) / total_points if total_points else 0.0
        ),
    )
    return MapPair(
        feature_map=feature_map,
        long_lasting_map=lasting_map,
        voxel_resolution=resolution,
        keyframe_poses=tuple(poses[i] for i in keyframes),
        stats=stats,
    )


def build_maps(
    frames: Sequence[tuple[PointCloud, RigidTransform]],
    policy: SemanticPolicy | None = None,
    min_distance: float = 5.0,
    resolution: float = 0.2,
    edge_extraction: bool = True,
    angle_threshold: float = 150.0,
    range_image: RangeImageSpec = RangeImageSpec(),
) -> MapPair:
    """Build the feature-point and long-lasting maps from labeled frames.

    Keyframes are chosen by the minimum-travel-distance rule; for each one
    the long-lasting points and the feature points (sticks plus building
    edges, or all building points when ``edge_extraction`` is off) are
    transformed into the map frame, accumulated, and voxelized at
    ``resolution``. Stats report the selected-frame ratio and the two map
    sizes as fractions of the raw input point count over all frames.
    """
    frames = list(frames)
    return build_maps_lazy(
        poses=[pose for _, pose in frames],
        frame_loader=lambda i: frames[i][0],
        total_points=sum(len(cloud) for cloud, _ in frames),
        policy=policy,
        min_distance=min_distance,
        resolution=resolution,
        edge_extraction=edge_extraction,
        angle_threshold=angle_threshold,
        range_image=range_image,
    )
