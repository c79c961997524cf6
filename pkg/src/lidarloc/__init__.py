"""Point cloud registration and map-based LiDAR localization toolkit."""

from .errors import CorruptFileError, DegenerateInputError, UnsupportedFormatError
from .estimators import CoarseToFineICP, IterativeClosestPoint, check_points
from .evaluation import (
    AteResult,
    MetricReport,
    RelativeErrors,
    Trajectory,
    absolute_translation_error,
    relative_errors,
)
from .geometry import (
    OrganizedScan,
    PointCloud,
    RangeImageSpec,
    RigidTransform,
    axis_angle_rotation,
    merge_clouds,
    organize,
    rotation_angle,
    voxel_downsample,
)
from .localization import (
    LocalizerConfig,
    LocalizerState,
    MapLocalizer,
    StepDiagnostic,
    extract_local_map,
    localize_sequence,
    predict_pose,
)
from .mapgen import (
    MapPair,
    MapStats,
    SemanticPolicy,
    build_maps,
    build_maps_lazy,
    extract_building_edges,
    extract_stick_points,
    filter_long_lasting,
    select_keyframes,
)
from .registration import (
    Correspondences,
    GateParams,
    IcpParams,
    RegistrationResult,
    ResolutionSchedule,
    best_rigid_align,
    coarse_to_fine_icp,
    evaluate_alignment,
    find_correspondences,
    gate_check,
    icp,
)

__version__ = "0.1.0"

__all__ = [
    "AteResult",
    "CoarseToFineICP",
    "Correspondences",
    "CorruptFileError",
    "DegenerateInputError",
    "GateParams",
    "IcpParams",
    "IterativeClosestPoint",
    "LocalizerConfig",
    "LocalizerState",
    "MapLocalizer",
    "MapPair",
    "MapStats",
    "MetricReport",
    "OrganizedScan",
    "PointCloud",
    "RangeImageSpec",
    "RegistrationResult",
    "RelativeErrors",
    "ResolutionSchedule",
    "RigidTransform",
    "SemanticPolicy",
    "StepDiagnostic",
    "Trajectory",
    "UnsupportedFormatError",
    "absolute_translation_error",
    "axis_angle_rotation",
    "best_rigid_align",
    "build_maps",
    "build_maps_lazy",
    "check_points",
    "coarse_to_fine_icp",
    "evaluate_alignment",
    "extract_building_edges",
    "extract_local_map",
    "extract_stick_points",
    "filter_long_lasting",
    "find_correspondences",
    "gate_check",
    "icp",
    "localize_sequence",
    "merge_clouds",
    "organize",
    "predict_pose",
    "relative_errors",
    "rotation_angle",
    "select_keyframes",
    "voxel_downsample",
]
