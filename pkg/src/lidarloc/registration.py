"""Rigid point cloud registration.

The building blocks are exact nearest-neighbor correspondence search, a
closed-form least-squares rigid solve, and the classic ICP loop. On top of
those sits a coarse-to-fine variant that runs ICP over a decreasing ladder
of voxel resolutions with a pose-change gate between stages: coarse clouds
have fewer local optima and therefore a wider convergence basin, while the
fine stages restore precision.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateInputError
from .geometry import PointCloud, RigidTransform, rotation_angle, voxel_downsample

_RANK_TOL = 1e-9
_EPS_FLOOR = 1e-12


@dataclass(frozen=True)
class IcpParams:
    """Termination and association parameters for a single ICP run.

    ``max_correspondence_distance`` is the association radius in meters;
    the epsilons bound the relative change of inlier RMSE and fitness
    between iterations below which the loop is declared converged.
    """

    max_correspondence_distance: float = 1.0
    max_iterations: int = 30
    relative_rmse_epsilon: float = 1e-6
    relative_fitness_epsilon: float = 1e-6

    def __post_init__(self) -> None:
        if self.max_correspondence_distance <= 0.0:
            raise ValueError("max_correspondence_distance must be positive")
        if self.max_iterations <= 0:
            raise ValueError("max_iterations must be positive")
        if self.relative_rmse_epsilon <= 0.0 or self.relative_fitness_epsilon <= 0.0:
            raise ValueError("convergence epsilons must be positive")


@dataclass(frozen=True)
class GateParams:
    """Bounds on how far a registration result may move from its reference."""

    max_translation_change: float = 2.0  # meters
    max_rotation_change: float = 5.0  # degrees

    def __post_init__(self) -> None:
        if self.max_translation_change <= 0.0 or self.max_rotation_change <= 0.0:
            raise ValueError("gate bounds must be positive")


@dataclass(frozen=True)
class ResolutionSchedule:
    """Strictly decreasing ladder of voxel resolutions in meters."""

    resolutions: tuple[float, ...] = (5.0, 1.0, 0.2)

    def __post_init__(self) -> None:
        res = tuple(float(r) for r in self.resolutions)
        if not res:
            raise ValueError("schedule must contain at least one resolution")
        if any(r <= 0.0 for r in res):
            raise ValueError("resolutions must be positive")
        if any(a <= b for a, b in zip(res, res[1:])):
            raise ValueError(f"resolutions must be strictly decreasing, got {res}")
        object.__setattr__(self, "resolutions", res)


@dataclass(frozen=True)
class RegistrationResult:
    """Outcome of a registration call.

    ``pose`` maps source coordinates into the target frame. ``fitness`` is
    the fraction of source points with a correspondence within the
    association radius; ``inlier_rmse`` is the RMS distance over those
    correspondences at the final pose.
    """

    pose: RigidTransform
    inlier_rmse: float
    fitness: float
    iterations: int
    converged: bool

    def __post_init__(self) -> None:
        if not 0.0 <= self.fitness <= 1.0:
            raise ValueError(f"fitness must be in [0, 1], got {self.fitness}")
        if self.inlier_rmse < 0.0 or self.iterations < 0:
            raise ValueError("inlier_rmse and iterations must be non-negative")


class Correspondences(NamedTuple):
    """Parallel arrays: one row per matched source point."""

    source_indices: np.ndarray
    target_indices: np.ndarray
    distances: np.ndarray

    def __len__(self) -> int:
        return self.source_indices.shape[0]


def _query_tree(
    tree: cKDTree, points: np.ndarray, max_distance: float
) -> Correspondences:
    if points.shape[0] == 0:
        empty_i = np.empty(0, dtype=np.int64)
        return Correspondences(empty_i, empty_i.copy(), np.empty(0))
    distances, targets = tree.query(points, k=1)
    mask = distances <= max_distance
    return Correspondences(
        np.nonzero(mask)[0], targets[mask].astype(np.int64), distances[mask]
    )


def find_correspondences(
    source: PointCloud, target: PointCloud, max_distance: float
) -> Correspondences:
    """Exact nearest target point for each source point, within ``max_distance``.

    Each source point contributes at most one pair; a pair is emitted iff
    the nearest-neighbor distance is <= ``max_distance``. The search tree is
    exact, so results match an exhaustive scan.
    """
    if max_distance <= 0.0:
        raise ValueError("max_distance must be positive")
    if len(target) == 0:
        raise ValueError("target cloud must be non-empty")
    return _query_tree(cKDTree(target.points), source.points, max_distance)


def best_rigid_align(
    source_points: np.ndarray, target_points: np.ndarray
) -> RigidTransform:
    """Least-squares rigid transform from paired points (Kabsch/SVD).

    Returns the pose minimizing ``sum ||R s_i + t - t_i||^2``, solved in
    closed form from the cross-covariance SVD with a determinant correction
    so reflections are never returned.

    Raises
    ------
    DegenerateInputError
        If fewer than 3 pairs are given, or the pairs are collinear or
        coincident so the rotation is not uniquely determined.
    """
    src = np.asarray(source_points, dtype=np.float64).reshape(-1, 3)
    tgt = np.asarray(target_points, dtype=np.float64).reshape(-1, 3)
    if src.shape != tgt.shape:
        raise ValueError(f"pair shapes differ: {src.shape} vs {tgt.shape}")
    if src.shape[0] < 3:
        raise DegenerateInputError(f"need at least 3 pairs, got {src.shape[0]}")

    src_center = src.mean(axis=0)
    tgt_center = tgt.mean(axis=0)
    cross = (src - src_center).T @ (tgt - tgt_center)
    u, sing, vt = np.linalg.svd(cross)
    if sing[1] <= _RANK_TOL * max(sing[0], _EPS_FLOOR):
        raise DegenerateInputError(
            "pairs are collinear or coincident; rotation is unconstrained"
        )
    d = np.sign(np.linalg.det(vt.T @ u.T))
    rotation = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    translation = tgt_center - rotation @ src_center
    return RigidTransform(rotation, translation)


def evaluate_alignment(
    source: PointCloud,
    target: PointCloud,
    pose: RigidTransform,
    max_distance: float,
) -> tuple[float, float]:
    """(fitness, inlier_rmse) of ``pose`` over source->target correspondences."""
    corr = find_correspondences(
        PointCloud(pose.apply(source.points)), target, max_distance
    )
    if len(corr) == 0:
        return 0.0, 0.0
    fitness = len(corr) / len(source)
    rmse = float(np.sqrt(np.mean(corr.distances**2)))
    return fitness, rmse


def _change_below(previous: float, current: float, epsilon: float, scale: float) -> bool:
    # Relative change test with an absolute escape at epsilon * scale, so a
    # noiseless run whose metric sits at numerical zero still terminates.
    delta = abs(previous - current)
    return delta <= epsilon * abs(previous) or delta <= epsilon * scale


def icp(
    source: PointCloud,
    target: PointCloud,
    init: RigidTransform | None = None,
    params: IcpParams = IcpParams(),
) -> RegistrationResult:
    """Point-to-point ICP from an initial pose.

    Alternates exact nearest-neighbor association with the closed-form
    rigid solve, starting from ``init``. Stops at ``max_iterations`` or
    when the relative changes of both inlier RMSE and fitness drop below
    their epsilons (the ``converged`` flag marks the epsilon stop).

    Losing the minimum of 3 correspondences (or hitting a degenerate pair
    configuration) at any iteration is not an error: the result then
    carries ``pose=init``, zero fitness and ``converged=False``.
    """
    if len(source) == 0 or len(target) == 0:
        raise ValueError("source and target clouds must be non-empty")
    if init is None:
        init = RigidTransform.identity()

    tree = cKDTree(target.points)
    max_dist = params.max_correspondence_distance
    n_source = len(source)
    pose = init
    failed = RegistrationResult(init, 0.0, 0.0, 0, False)

    corr = _query_tree(tree, pose.apply(source.points), max_dist)
    if len(corr) == 0:
        return failed
    prev_fitness = len(corr) / n_source
    prev_rmse = float(np.sqrt(np.mean(corr.distances**2)))

    fitness, rmse = prev_fitness, prev_rmse
    converged = False
    iterations = 0
    for iterations in range(1, params.max_iterations + 1):
        if len(corr) < 3:
            return replace(failed, iterations=iterations)
        src_pts = pose.apply(source.points[corr.source_indices])
        tgt_pts = target.points[corr.target_indices]
        try:
            delta = best_rigid_align(src_pts, tgt_pts)
        except DegenerateInputError:
            return replace(failed, iterations=iterations)
        pose = delta.compose(pose)

        corr = _query_tree(tree, pose.apply(source.points), max_dist)
        if len(corr) == 0:
            return replace(failed, iterations=iterations)
        fitness = len(corr) / n_source
        rmse = float(np.sqrt(np.mean(corr.distances**2)))
        if _change_below(
            prev_rmse, rmse, params.relative_rmse_epsilon, max_dist
        ) and _change_below(
            prev_fitness, fitness, params.relative_fitness_epsilon, 1.0
        ):
            converged = True
            break
        prev_fitness, prev_rmse = fitness, rmse

    return RegistrationResult(pose, rmse, fitness, iterations, converged)


def gate_check(
    candidate: RigidTransform, reference: RigidTransform, gate: GateParams
) -> bool:
    """True iff ``candidate`` stays within the gate bounds of ``reference``.

    Translation is compared by Euclidean distance, rotation by the geodesic
    angle ``acos((trace(R_ref^T R_cand) - 1) / 2)``.
    """
    shift = np.linalg.norm(candidate.translation - reference.translation)
    if shift > gate.max_translation_change:
        return False
    angle = np.degrees(rotation_angle(reference.rotation, candidate.rotation))
    return angle <= gate.max_rotation_change


def stage_params(params: IcpParams, resolution: float) -> IcpParams:
    """ICP params for one ladder stage: association radius widened to 2x voxel size.

    A cloud voxelized at resolution r has roughly r inter-point spacing, so
    coarse stages need a proportionally wide association radius.
    """
    return replace(
        params,
        max_correspondence_distance=max(
            2.0 * resolution, params.max_correspondence_distance
        ),
    )


def coarse_to_fine_icp(
    source: PointCloud,
    target: PointCloud,
    init: RigidTransform | None = None,
    schedule: ResolutionSchedule = ResolutionSchedule(),
    gate: GateParams = GateParams(),
    params: IcpParams = IcpParams(),
) -> RegistrationResult:
    """Multi-resolution ICP with per-stage pose-change gating.

    For each resolution in the (decreasing) schedule, both clouds are
    re-voxelized from the raw inputs at that resolution and ICP runs from
    the current best pose. A stage result is adopted only if it passes the
    gate against the initial pose of this call; the first rejection stops
    the ladder and the last accepted result is returned. If the very first
    stage is rejected the result carries ``pose=init`` and
    ``converged=False``.

    Registration failures inside a stage surface through fitness/converged;
    only invalid arguments raise.
    """
    if len(source) == 0 or len(target) == 0:
        raise ValueError("source and target clouds must be non-empty")
    if init is None:
        init = RigidTransform.identity()

    pose = init
    accepted: RegistrationResult | None = None
    total_iterations = 0
    for resolution in schedule.resolutions:
        src = voxel_downsample(source, resolution)
        tgt = voxel_downsample(target, resolution)
        result = icp(src, tgt, pose, stage_params(params, resolution))
        total_iterations += result.iterations
        if not gate_check(result.pose, init, gate):
            break
        pose = result.pose
        accepted = result

    if accepted is None:
        return RegistrationResult(init, 0.0, 0.0, total_iterations, False)
    return replace(accepted, iterations=total_iterations)
