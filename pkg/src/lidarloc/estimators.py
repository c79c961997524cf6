"""Scikit-learn style estimators for the registration algorithms.

These wrap the functional core so the aligners compose with the wider
ecosystem: parameters live in ``__init__`` and are visible to
``get_params``/``set_params``/``clone``, fitting validates inputs, and
fitted state uses trailing-underscore attributes. ``fit(X, y)`` estimates
the rigid transform that maps the source points ``X`` onto the target
points ``y``; ``transform`` applies it.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .geometry import PointCloud, RigidTransform
from .registration import (
    GateParams,
    IcpParams,
    RegistrationResult,
    ResolutionSchedule,
    coarse_to_fine_icp,
    icp,
)

__all__ = ["check_points", "IterativeClosestPoint", "CoarseToFineICP"]


def check_points(X, name: str = "X") -> np.ndarray:
    """Validate an (N, 3) finite float array of point coordinates."""
    pts = np.asarray(X, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"{name} must have shape (n_points, 3), got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError(f"{name} contains NaN or Inf values")
    return pts


class _RigidAlignerMixin(TransformerMixin):
    """Shared fitted-state handling for the rigid registration estimators."""

    def _store(self, result: RegistrationResult) -> None:
        self.pose_ = result.pose
        self.rotation_ = result.pose.rotation
        self.translation_ = result.pose.translation
        self.fitness_ = result.fitness
        self.inlier_rmse_ = result.inlier_rmse
        self.n_iterations_ = result.iterations
        self.converged_ = result.converged

    def transform(self, X) -> np.ndarray:
        """Apply the estimated rigid transform to points ``X``."""
        check_is_fitted(self, "pose_")
        return self.pose_.apply(check_points(X))

    def inverse_transform(self, X) -> np.ndarray:
        """Map points from the target frame back into the source frame."""
        check_is_fitted(self, "pose_")
        return self.pose_.inverse().apply(check_points(X))


class IterativeClosestPoint(_RigidAlignerMixin, BaseEstimator):
    """Point-to-point ICP as a scikit-learn estimator.

    Parameters
    ----------
    max_correspondence_distance : float, default=1.0
        Association radius in meters.
    max_iterations : int, default=30
    relative_rmse_epsilon, relative_fitness_epsilon : float, default=1e-6
        Convergence thresholds on the relative change per iteration.

    Attributes
    ----------
    pose_ : RigidTransform
        Estimated source-to-target transform.
    rotation_, translation_ : ndarray
        The components of ``pose_``.
    fitness_, inlier_rmse_, n_iterations_, converged_
        Diagnostics of the final iteration.
    """

    def __init__(
        self,
        max_correspondence_distance: float = 1.0,
        max_iterations: int = 30,
        relative_rmse_epsilon: float = 1e-6,
        relative_fitness_epsilon: float = 1e-6,
    ):
        self.max_correspondence_distance = max_correspondence_distance
        self.max_iterations = max_iterations
        self.relative_rmse_epsilon = relative_rmse_epsilon
        self.relative_fitness_epsilon = relative_fitness_epsilon

    def _params(self) -> IcpParams:
        return IcpParams(
            max_correspondence_distance=self.max_correspondence_distance,
            max_iterations=self.max_iterations,
            relative_rmse_epsilon=self.relative_rmse_epsilon,
            relative_fitness_epsilon=self.relative_fitness_epsilon,
        )

    def fit(self, X, y=None, init: RigidTransform | None = None):
        """Estimate the transform aligning source points ``X`` to target ``y``."""
        if y is None:
            raise ValueError("y (target points) is required")
        source = PointCloud(check_points(X, "X"))
        target = PointCloud(check_points(y, "y"))
        self._store(icp(source, target, init=init, params=self._params()))
        return self


class CoarseToFineICP(_RigidAlignerMixin, BaseEstimator):
    """Multi-resolution ICP with pose-change gating, scikit-learn style.

    Runs ICP over a decreasing ladder of voxel resolutions; each stage
    re-voxelizes the raw inputs and must pass a translation/rotation gate
    against the initial pose or the ladder stops.

    Parameters
    ----------
    resolutions : tuple of float, default=(5.0, 1.0, 0.2)
        Strictly decreasing voxel sizes in meters.
    max_translation_change : float, default=2.0
        Gate bound in meters.
    max_rotation_change : float, default=5.0
        Gate bound in degrees.
    max_correspondence_distance, max_iterations,
    relative_rmse_epsilon, relative_fitness_epsilon
        Per-stage ICP parameters; the association radius is widened to
        twice the stage resolution when that is larger.
    """

    def __init__(
        self,
        resolutions: tuple[float, ...] = (5.0, 1.0, 0.2),
        max_translation_change: float = 2.0,
        max_rotation_change: float = 5.0,
        max_correspondence_distance: float = 1.0,
        max_iterations: int = 30,
        relative_rmse_epsilon: float = 1e-6,
        relative_fitness_epsilon: float = 1e-6,
    ):
        self.resolutions = resolutions
        self.max_translation_change = max_translation_change
        self.max_rotation_change = max_rotation_change
        self.max_correspondence_distance = max_correspondence_distance
        self.max_iterations = max_iterations
        self.relative_rmse_epsilon = relative_rmse_epsilon
        self.relative_fitness_epsilon = relative_fitness_epsilon

    def fit(self, X, y=None, init: RigidTransform | None = None):
        """Estimate the transform aligning source points ``X`` to target ``y``."""
        if y is None:
            raise ValueError("y (target points) is required")
        source = PointCloud(check_points(X, "X"))
        target = PointCloud(check_points(y, "y"))
        result = coarse_to_fine_icp(
            source,
            target,
            init=init,
            schedule=ResolutionSchedule(tuple(self.resolutions)),
            gate=GateParams(self.max_translation_change, self.max_rotation_change),
            params=IcpParams(
                max_correspondence_distance=self.max_correspondence_distance,
                max_iterations=self.max_iterations,
                relative_rmse_epsilon=self.relative_rmse_epsilon,
                relative_fitness_epsilon=self.relative_fitness_epsilon,
            ),
        )
        self._store(result)
        return self
