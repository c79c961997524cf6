"""Trajectory evaluation: KITTI-style relative errors and absolute translation error.

``relative_errors`` averages per-segment translation (%) and rotation
(degrees per 100 m) errors over segment lengths of 100 m to 800 m measured
along the ground-truth path. ``absolute_translation_error`` is the
per-frame Euclidean position error; map-based estimates share the
ground-truth frame, so no alignment is applied unless requested.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .geometry import RigidTransform, rotation_angle
from .registration import best_rigid_align

SEGMENT_LENGTHS = (100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0)
START_FRAME_STEP = 10


@dataclass(frozen=True)
class Trajectory:
    """Ordered sequence of poses, optionally timestamped (seconds)."""

    poses: tuple[RigidTransform, ...]
    timestamps: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "poses", tuple(self.poses))
        if self.timestamps is not None:
            stamps = tuple(float(t) for t in self.timestamps)
            if len(stamps) != len(self.poses):
                raise ValueError("timestamps length must match pose count")
            object.__setattr__(self, "timestamps", stamps)

    def __len__(self) -> int:
        return len(self.poses)

    def translations(self) -> np.ndarray:
        if not self.poses:
            return np.empty((0, 3))
        return np.array([pose.translation for pose in self.poses])

    def path_lengths(self) -> np.ndarray:
        """Cumulative path length at each frame, starting at 0."""
        t = self.translations()
        steps = np.linalg.norm(np.diff(t, axis=0), axis=1)
        return np.concatenate([[0.0], np.cumsum(steps)])


@dataclass(frozen=True)
class RelativeErrors:
    t_rel: float  # percent, averaged over 100 m - 800 m segments
    r_rel: float  # degrees per 100 m
    n_segments: int


@dataclass(frozen=True)
class AteResult:
    mean: float
    std: float  # population standard deviation
    errors: np.ndarray  # per-frame position error in meters


@dataclass(frozen=True)
class MetricReport:
    t_rel: float
    r_rel: float
    ate_mean: float
    ate_std: float

    def __post_init__(self) -> None:
        for name in ("t_rel", "r_rel", "ate_mean", "ate_std"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")


def _check_lengths(ground_truth: Trajectory, estimate: Trajectory) -> None:
    if len(ground_truth) != len(estimate):
        raise ValueError(
            f"trajectory lengths differ: {len(ground_truth)} vs {len(estimate)}"
        )


def relative_errors(
    ground_truth: Trajectory,
    estimate: Trajectory,
    segment_lengths: Sequence[float] = SEGMENT_LENGTHS,
    start_step: int = START_FRAME_STEP,
) -> RelativeErrors | None:
    """Average relative translation/rotation error over path-length segments.

    For every start frame (sampled every ``start_step`` frames) and every
    segment length L, the segment end is the first frame whose cumulative
    ground-truth path length reaches L past the start. The error pose is
    ``inverse(gt_rel) @ est_rel``; its translation norm contributes
    ``100 * |t| / L`` percent and its rotation angle ``100 * deg / L``
    degrees per 100 m. Returns None when the path is too short for any
    segment.
    """
    _check_lengths(ground_truth, estimate)
    if len(ground_truth) < 2:
        raise ValueError("need at least 2 poses")
    distances = ground_truth.path_lengths()
    n = len(ground_truth)

    t_samples: list[float] = []
    r_samples: list[float] = []
    for first in range(0, n, start_step):
        for length in segment_lengths:
            last = int(np.searchsorted(distances, distances[first] + length))
            if last >= n:
                break
            gt_rel = ground_truth.poses[first].inverse() @ ground_truth.poses[last]
            est_rel = estimate.poses[first].inverse() @ estimate.poses[last]
            error = gt_rel.inverse() @ est_rel
            t_samples.append(float(np.linalg.norm(error.translation)) / length)
            r_samples.append(np.degrees(rotation_angle(error.rotation)) / length)

    if not t_samples:
        return None
    return RelativeErrors(
        t_rel=100.0 * float(np.mean(t_samples)),
        r_rel=100.0 * float(np.mean(r_samples)),
        n_segments=len(t_samples),
    )


def absolute_translation_error(
    ground_truth: Trajectory, estimate: Trajectory, align: bool = False
) -> AteResult:
    """Per-frame position error; mean and population std.

    By default no alignment is applied (estimates live in the map frame).
    With ``align=True`` the estimate's positions are first registered onto
    the ground truth with the closed-form rigid solve, for comparison
    against methods that report aligned ATE; this requires a trajectory
    whose positions are not collinear.
    """
    _check_lengths(ground_truth, estimate)
    gt = ground_truth.translations()
    est = estimate.translations()
    if align:
        correction = best_rigid_align(est, gt)
        est = correction.apply(est)
    errors = np.linalg.norm(gt - est, axis=1)
    return AteResult(
        mean=float(errors.mean()), std=float(errors.std()), errors=errors
    )


def write_metrics_line(
    path: str | Path, sequence_id: str, report: MetricReport, append: bool = True
) -> None:
    """Append one tab-separated metrics line: id, t_rel, r_rel, ate_mean, ate_std."""
    mode = "a" if append else "w"
    with open(path, mode, encoding="utf-8") as handle:
        handle.write(
            f"{sequence_id}\t{report.t_rel:.6f}\t{report.r_rel:.6f}"
            f"\t{report.ate_mean:.6f}\t{report.ate_std:.6f}\n"
        )


def write_ate_csv(
    path: str | Path, estimate: Trajectory, errors: np.ndarray
) -> None:
    """Per-frame ATE table for plotting: frame index, x, y, z, error."""
    if len(estimate) != errors.shape[0]:
        raise ValueError("error count must match trajectory length")
    positions = estimate.translations()
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["frame", "x", "y", "z", "error"])
        for index, (pos, err) in enumerate(zip(positions, errors)):
            writer.writerow(
                [index, f"{pos[0]:.6f}", f"{pos[1]:.6f}", f"{pos[2]:.6f}", f"{err:.6f}"]
            )
