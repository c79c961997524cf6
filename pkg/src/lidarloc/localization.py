"""Map-based LiDAR localization.

Each incoming labeled frame is localized in four steps, any subset of which
can be enabled:

1. constant-velocity prediction from the recent pose history,
2. frame-to-frame odometry (coarse-to-fine ICP against the previous
   frame's long-lasting points),
3. coarse-to-fine ICP of the frame's feature points against a local crop
   of the feature-point map,
4. coarse-to-fine ICP of the frame's long-lasting points against a local
   crop of the long-lasting map (single 1.0 m resolution by default, for
   speed).

Every step's result must pass a translation/rotation gate against the pose
entering that step, otherwise it is discarded and the pose falls through
unchanged. The pipeline is deterministic: identical inputs produce
bit-identical poses.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import PointCloud, RangeImageSpec, RigidTransform, merge_clouds, organize
from .mapgen import (
    MapPair,
    SemanticPolicy,
    extract_building_edges,
    extract_stick_points,
    filter_long_lasting,
)
from .registration import (
    GateParams,
    IcpParams,
    RegistrationResult,
    ResolutionSchedule,
    coarse_to_fine_icp,
    gate_check,
)

ALL_STEPS = frozenset({1, 2, 3, 4})


@dataclass(frozen=True)
class LocalizerConfig:
    """Tunables of the four-step localizer."""

    local_map_radius: float = 100.0
    velocity_window: int = 4
    schedule: ResolutionSchedule = ResolutionSchedule((5.0, 1.0, 0.2))
    step4_schedule: ResolutionSchedule = ResolutionSchedule((1.0,))
    gate: GateParams = GateParams()
    icp: IcpParams = IcpParams()
    enabled_steps: frozenset[int] = ALL_STEPS
    # Step-3 source selection: sparse feature points only, or the full
    # long-lasting subset of the frame.
    step3_features_only: bool = True
    range_image: RangeImageSpec = RangeImageSpec()
    edge_angle_threshold: float = 150.0

    def __post_init__(self) -> None:
        if self.local_map_radius <= 0.0:
            raise ValueError("local_map_radius must be positive")
        if self.velocity_window < 1:
            raise ValueError("velocity_window must be at least 1")
        steps = frozenset(self.enabled_steps)
        if not steps or not steps <= ALL_STEPS:
            raise ValueError(f"enabled_steps must be a non-empty subset of 1..4, got {steps}")
        object.__setattr__(self, "enabled_steps", steps)


@dataclass
class LocalizerState:
    """Rolling history of accepted poses plus the previous frame's cache."""

    accepted_poses: list[RigidTransform] = field(default_factory=list)
    previous_long_lasting: PointCloud | None = None


@dataclass(frozen=True)
class StepDiagnostic:
    """What one localization step did for one frame."""

    step: int
    ran: bool
    accepted: bool
    reason: str = ""
    result: RegistrationResult | None = None


def extract_local_map(
    map_cloud: PointCloud, center: np.ndarray, radius: float
) -> PointCloud:
    """Points within Euclidean distance ``radius`` of ``center`` (full 3D)."""
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    center = np.asarray(center, dtype=np.float64).reshape(3)
    distances = np.linalg.norm(map_cloud.points - center, axis=1)
    return map_cloud.select(distances <= radius)


def predict_pose(state: LocalizerState, window: int) -> RigidTransform:
    """Constant-velocity position extrapolation; orientation stays at the last pose.

    The predicted translation adds the mean of the last ``window``
    per-frame translation deltas to the last pose. With a single pose in
    the history the prediction is that pose itself.
    """
    if not state.accepted_poses:
        raise ValueError("pose history is empty; localizer was not initialized")
    poses = state.accepted_poses
    last = poses[-1]
    if len(poses) == 1:
        return last
    span = min(window, len(poses) - 1)
    translations = np.array([p.translation for p in poses[-(span + 1):]])
    velocity = np.diff(translations, axis=0).mean(axis=0)
    return RigidTransform(last.rotation, last.translation + velocity)


class MapLocalizer:
    """Sequential frame localizer against a prebuilt map pair.

    Frames must be processed in order by a single owner; the maps are never
    mutated and may be shared between localizer instances.
    """

    def __init__(
        self,
        maps: MapPair,
        initial_pose: RigidTransform,
        config: LocalizerConfig | None = None,
        policy: SemanticPolicy | None = None,
        initial_frame: PointCloud | None = None,
    ):
        self.maps = maps
        self.config = config if config is not None else LocalizerConfig()
        self.policy = policy if policy is not None else SemanticPolicy.semantic_kitti()
        self.state = LocalizerState(accepted_poses=[initial_pose])
        if initial_frame is not None:
            self.state.previous_long_lasting = filter_long_lasting(
                initial_frame, self.policy
            )

    def _frame_features(self, frame: PointCloud) -> PointCloud:
        cfg = self.config
        sticks = extract_stick_points(frame, self.policy)
        organized = organize(
            frame,
            cfg.range_image.rows,
            cfg.range_image.cols,
            cfg.range_image.fov_deg,
        )
        edges = extract_building_edges(
            frame, organized, self.policy, cfg.edge_angle_threshold
        )
        return merge_clouds([sticks, edges])

    def _map_step(
        self,
        step: int,
        source: PointCloud,
        map_cloud: PointCloud,
        center: np.ndarray,
        pose: RigidTransform,
        schedule: ResolutionSchedule,
    ) -> tuple[RigidTransform, StepDiagnostic]:
        cfg = self.config
        local = extract_local_map(map_cloud, center, cfg.local_map_radius)
        if len(local) == 0:
            return pose, StepDiagnostic(step, False, False, "empty local map")
        if len(source) == 0:
            return pose, StepDiagnostic(step, False, False, "empty source cloud")
        result = coarse_to_fine_icp(source, local, pose, schedule, cfg.gate, cfg.icp)
        if gate_check(result.pose, pose, cfg.gate):
            return result.pose, StepDiagnostic(step, True, True, "", result)
        return pose, StepDiagnostic(step, True, False, "gate rejected", result)

    def localize(self, frame: PointCloud) -> tuple[RigidTransform, list[StepDiagnostic]]:
        """Estimate the map-frame pose of one labeled frame.

        Runs the enabled steps in order, appends the final pose to the
        history, refreshes the previous-frame cache, and returns the pose
        together with per-step diagnostics.
        """
        if frame.labels is None:
            raise ValueError("frame must carry per-point semantic labels")
        cfg = self.config
        last = self.state.accepted_poses[-1]
        last_position = last.translation
        diagnostics: list[StepDiagnostic] = []

        if 1 in cfg.enabled_steps:
            pose = predict_pose(self.state, cfg.velocity_window)
            diagnostics.append(StepDiagnostic(1, True, True, "velocity prediction"))
        else:
            pose = last
            diagnostics.append(StepDiagnostic(1, False, False, "disabled"))

        current_ll = filter_long_lasting(frame, self.policy)

        if 2 in cfg.enabled_steps:
            previous = self.state.previous_long_lasting
            if previous is None or len(previous) == 0:
                diagnostics.append(
                    StepDiagnostic(2, False, False, "no previous frame cached")
                )
            elif len(current_ll) == 0:
                diagnostics.append(
                    StepDiagnostic(2, False, False, "empty source cloud")
                )
            else:
                # Current-frame coords -> previous-frame coords, seeded from
                # the predicted pose, then composed back into the map frame.
                relative_init = last.inverse().compose(pose)
                result = coarse_to_fine_icp(
                    current_ll, previous, relative_init, cfg.schedule, cfg.gate, cfg.icp
                )
                candidate = last.compose(result.pose)
                if gate_check(candidate, pose, cfg.gate):
                    pose = candidate
                    diagnostics.append(StepDiagnostic(2, True, True, "", result))
                else:
                    diagnostics.append(
                        StepDiagnostic(2, True, False, "gate rejected", result)
                    )
        else:
            diagnostics.append(StepDiagnostic(2, False, False, "disabled"))

        if 3 in cfg.enabled_steps:
            source = (
                self._frame_features(frame) if cfg.step3_features_only else current_ll
            )
            pose, diag = self._map_step(
                3, source, self.maps.feature_map, last_position, pose, cfg.schedule
            )
            diagnostics.append(diag)
        else:
            diagnostics.append(StepDiagnostic(3, False, False, "disabled"))

        if 4 in cfg.enabled_steps:
            pose, diag = self._map_step(
                4,
                current_ll,
                self.maps.long_lasting_map,
                last_position,
                pose,
                cfg.step4_schedule,
            )
            diagnostics.append(diag)
        else:
            diagnostics.append(StepDiagnostic(4, False, False, "disabled"))

        self.state.accepted_poses.append(pose)
        self.state.previous_long_lasting = current_ll
        return pose, diagnostics


def localize_sequence(
    frames,
    maps: MapPair,
    initial_pose: RigidTransform,
    config: LocalizerConfig | None = None,
    policy: SemanticPolicy | None = None,
) -> list[RigidTransform]:
    """Localize frames 1..N-1 of a sequence; frame 0 supplies the bootstrap pose.

    Returns one pose per frame (the first being ``initial_pose``).
    """
    frames = list(frames)
    if not frames:
        raise ValueError("at least one frame is required")
    localizer = MapLocalizer(
        maps, initial_pose, config=config, policy=policy, initial_frame=frames[0]
    )
    trajectory = [initial_pose]
    for frame in frames[1:]:
        pose, _ = localizer.localize(frame)
        trajectory.append(pose)
    return trajectory
