"""Command-line interface.

Subcommands:

- ``register``: align two clouds with coarse-to-fine ICP.
- ``mapgen``: build the feature/long-lasting maps from a labeled sequence.
- ``localize``: run the four-step localizer over a sequence.
- ``evaluate``: odometry metrics and ATE between two pose files.
- ``synth``: generate a synthetic labeled sequence with ground truth.

Exit codes: 0 success, 1 usage or I/O error, 2 algorithmic fallback (the
requested registration did not converge and the initial pose was kept).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import load_config, resolve
from .errors import CorruptFileError
from .evaluation import (
    MetricReport,
    Trajectory,
    absolute_translation_error,
    relative_errors,
    write_ate_csv,
    write_metrics_line,
)
from .geometry import PointCloud, RangeImageSpec, RigidTransform
from .kitti import SequenceSource, read_poses, read_scan, write_labels, write_poses, write_scan
from .localization import LocalizerConfig, localize_sequence
from .mapgen import SemanticPolicy, build_maps_lazy, select_keyframes
from .mapio import read_map, read_map_pair, write_map_pair, write_ply
from .registration import GateParams, IcpParams, ResolutionSchedule, coarse_to_fine_icp
from . import synth


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; the CLI contract
    # reserves 2 for algorithmic fallbacks and uses 1 for usage/IO errors.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _parse_schedule(text: str) -> ResolutionSchedule:
    try:
        return ResolutionSchedule(tuple(float(v) for v in text.split(",") if v))
    except ValueError as exc:
        raise ValueError(f"bad schedule '{text}': {exc}") from None


def _parse_steps(text: str) -> frozenset[int]:
    return frozenset(int(v) for v in text.split(",") if v)

def _parse_fov(text: str) -> tuple[float, float]:
    parts = [float(v) for v in text.split(",") if v]
    if len(parts) != 2:
        raise ValueError(f"bad field of view '{text}': expected 'low,high'")
    return parts[0], parts[1]


def _pose_line(pose: RigidTransform) -> str:
    return " ".join(f"{v:.12e}" for v in pose.matrix()[:3, :].reshape(-1))


def _load_cloud(path: str) -> PointCloud:
    if path.endswith(".bin"):
        return read_scan(path)
    cloud, _ = read_map(path)
    return cloud


def _range_image(args, config) -> RangeImageSpec:
    return RangeImageSpec(
        rows=resolve(args.range_rows, config, "range_rows", 64, int),
        cols=resolve(args.range_cols, config, "range_cols", 2048, int),
        fov_deg=resolve(args.range_fov, config, "range_fov", (-24.9, 2.0), _parse_fov),
    )


def _add_range_image_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--range-rows", type=int, help="range image rows (default 64)")
    parser.add_argument("--range-cols", type=int, help="range image columns (default 2048)")
    parser.add_argument(
        "--range-fov",
        type=_parse_fov,
        metavar="LO,HI",
        help="vertical field of view in degrees (default -24.9,2.0)",
    )


def cmd_register(args) -> int:
    config = load_config(args.config) if args.config else {}
    source = _load_cloud(args.source)
    target = _load_cloud(args.target)
    schedule = resolve(args.schedule, config, "schedule", ResolutionSchedule(), _parse_schedule)
    gate = GateParams(
        max_translation_change=resolve(args.gate_trans, config, "gate_trans", 2.0),
        max_rotation_change=resolve(args.gate_rot, config, "gate_rot", 5.0),
    )
    params = IcpParams(
        max_correspondence_distance=resolve(args.max_corr, config, "max_corr", 1.0),
        max_iterations=resolve(args.max_iterations, config, "max_iterations", 30, int),
    )
    result = coarse_to_fine_icp(source, target, schedule=schedule, gate=gate, params=params)
    print(_pose_line(result.pose))
    print(
        f"inlier_rmse={result.inlier_rmse:.6f} fitness={result.fitness:.6f} "
        f"iterations={result.iterations} converged={result.converged}"
    )
    return 0 if result.converged else 2


def cmd_mapgen(args) -> int:
    config = load_config(args.config) if args.config else {}
    source = SequenceSource.from_directory(args.sequence_dir)
    if source.label_dir is None:
        print("error: sequence has no labels/ directory", file=sys.stderr)
        return 1
    policy = (
        SemanticPolicy.from_file(args.policy)
        if args.policy
        else SemanticPolicy.semantic_kitti()
    )
    poses = source.load_poses()
    if len(poses) < len(source):
        print(
            f"error: {len(poses)} poses for {len(source)} scans", file=sys.stderr
        )
        return 1
    poses = poses[: len(source)]

    maps = build_maps_lazy(
        poses=poses,
        frame_loader=lambda i: source.load_frame(i),
        total_points=source.total_point_count(),
        policy=policy,
        min_distance=resolve(args.min_distance, config, "min_distance", 5.0),
        resolution=resolve(args.resolution, config, "resolution", 0.2),
        edge_extraction=not args.no_edges,
        angle_threshold=resolve(args.angle_threshold, config, "angle_threshold", 150.0),
        range_image=_range_image(args, config),
    )
    feature_path, lasting_path = write_map_pair(args.out, maps)
    if args.ply:
        write_ply(feature_path.with_suffix(".ply"), maps.feature_map)
        write_ply(lasting_path.with_suffix(".ply"), maps.long_lasting_map)
    stats = maps.stats
    print(
        f"frames_pct={100.0 * stats.frame_fraction:.2f} "
        f"feature_points_pct={100.0 * stats.feature_fraction:.4f} "
        f"long_lasting_points_pct={100.0 * stats.long_lasting_fraction:.4f}"
    )
    print(f"wrote {feature_path} ({len(maps.feature_map)} points)")
    print(f"wrote {lasting_path} ({len(maps.long_lasting_map)} points)")
    return 0


def cmd_localize(args) -> int:
    config = load_config(args.config) if args.config else {}
    source = SequenceSource.from_directory(args.sequence_dir)
    if source.label_dir is None:
        print("error: sequence has no labels/ directory", file=sys.stderr)
        return 1
    maps = read_map_pair(args.map)
    poses = source.load_poses()
    localizer_config = LocalizerConfig(
        local_map_radius=resolve(args.radius, config, "radius", 100.0),
        schedule=resolve(args.schedule, config, "schedule", ResolutionSchedule(), _parse_schedule),
        step4_schedule=resolve(
            args.step4_schedule,
            config,
            "step4_schedule",
            ResolutionSchedule((1.0,)),
            _parse_schedule,
        ),
        gate=GateParams(
            max_translation_change=resolve(args.gate_trans, config, "gate_trans", 2.0),
            max_rotation_change=resolve(args.gate_rot, config, "gate_rot", 5.0),
        ),
        enabled_steps=resolve(args.steps, config, "steps", frozenset({1, 2, 3, 4}), _parse_steps),
        range_image=_range_image(args, config),
    )
    policy = (
        SemanticPolicy.from_file(args.policy)
        if args.policy
        else SemanticPolicy.semantic_kitti()
    )
    frames = (source.load_frame(i) for i in range(len(source)))
    trajectory = localize_sequence(
        frames, maps, initial_pose=poses[0], config=localizer_config, policy=policy
    )
    write_poses(args.out, trajectory)
    print(f"wrote {args.out} ({len(trajectory)} poses)")
    return 0


def cmd_evaluate(args) -> int:
    gt = Trajectory(tuple(read_poses(args.gt)))
    est = Trajectory(tuple(read_poses(args.est)))
    rel = relative_errors(gt, est)
    ate = absolute_translation_error(gt, est, align=args.align)
    t_rel = rel.t_rel if rel is not None else float("nan")
    r_rel = rel.r_rel if rel is not None else float("nan")
    print(
        f"t_rel={t_rel:.6f} r_rel={r_rel:.6f} "
        f"ate_mean={ate.mean:.6f} ate_std={ate.std:.6f}"
    )
    if args.metrics_out:
        report = MetricReport(
            t_rel=0.0 if rel is None else rel.t_rel,
            r_rel=0.0 if rel is None else rel.r_rel,
            ate_mean=ate.mean,
            ate_std=ate.std,
        )
        write_metrics_line(args.metrics_out, args.sequence_id, report)
    if args.ate_csv:
        write_ate_csv(args.ate_csv, est, ate.errors)
    return 0


def cmd_synth(args) -> int:
    out = Path(args.out)
    (out / "velodyne").mkdir(parents=True, exist_ok=True)
    (out / "labels").mkdir(parents=True, exist_ok=True)

    if args.scene == "corridor":
        frames = synth.corridor_sequence(
            n_frames=args.frames, step=args.step, noise_sigma=args.noise, seed=args.seed
        )
    else:
        scene = synth.urban_world(args.seed)
        rng = np.random.default_rng(args.seed + 1)
        pose = synth.urban_pose()
        frames = [
            (
                synth.cast_scan(
                    scene,
                    pose,
                    synth.URBAN_ROWS,
                    synth.URBAN_COLS,
                    synth.URBAN_FOV,
                    max_range=90.0,
                    noise_sigma=args.noise,
                    rng=rng,
                ),
                pose,
            )
            for _ in range(args.frames)
        ]

    for index, (cloud, _) in enumerate(frames):
        write_scan(out / "velodyne" / f"{index:06d}.bin", cloud)
        write_labels(out / "labels" / f"{index:06d}.label", cloud.labels)
    write_poses(out / "poses.txt", [pose for _, pose in frames])
    total = sum(len(cloud) for cloud, _ in frames)
    print(f"wrote {len(frames)} frames ({total} points) to {out}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="lidarloc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("register", parents=[], help="align two point clouds")
    p.add_argument("source", help="source cloud (.bin scan or .map file)")
    p.add_argument("target", help="target cloud (.bin scan or .map file)")
    p.add_argument("--schedule", type=_parse_schedule, metavar="R1,R2,...")
    p.add_argument("--gate-trans", type=float, help="gate translation bound in meters")
    p.add_argument("--gate-rot", type=float, help="gate rotation bound in degrees")
    p.add_argument("--max-corr", type=float, help="base correspondence distance")
    p.add_argument("--max-iterations", type=int)
    p.add_argument("--config", help="key-value config file")
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("mapgen", help="build maps from a labeled sequence")
    p.add_argument("sequence_dir")
    p.add_argument("--out", required=True, help="output map prefix")
    p.add_argument("--min-distance", type=float, help="keyframe spacing in meters")
    p.add_argument("--resolution", type=float, help="map voxel size in meters")
    p.add_argument("--no-edges", action="store_true", help="keep all building points")
    p.add_argument("--angle-threshold", type=float, help="edge angle threshold in degrees")
    p.add_argument("--policy", help="semantic policy JSON file")
    p.add_argument("--ply", action="store_true", help="also export PLY files")
    p.add_argument("--config", help="key-value config file")
    _add_range_image_options(p)
    p.set_defaults(func=cmd_mapgen)

    p = sub.add_parser("localize", help="localize a sequence against maps")
    p.add_argument("sequence_dir")
    p.add_argument("--map", required=True, help="map prefix written by mapgen")
    p.add_argument("--out", required=True, help="output trajectory file")
    p.add_argument("--steps", type=_parse_steps, metavar="1,2,3,4")
    p.add_argument("--radius", type=float, help="local map radius in meters")
    p.add_argument("--schedule", type=_parse_schedule, metavar="R1,R2,...")
    p.add_argument("--step4-schedule", type=_parse_schedule, metavar="R1,...")
    p.add_argument("--gate-trans", type=float)
    p.add_argument("--gate-rot", type=float)
    p.add_argument("--policy", help="semantic policy JSON file")
    p.add_argument("--config", help="key-value config file")
    _add_range_image_options(p)
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("evaluate", help="compare two trajectories")
    p.add_argument("--gt", required=True, help="ground-truth pose file")
    p.add_argument("--est", required=True, help="estimated pose file")
    p.add_argument("--align", action="store_true", help="rigidly align before ATE")
    p.add_argument("--metrics-out", help="append a metrics line to this file")
    p.add_argument("--sequence-id", default="seq", help="id for the metrics line")
    p.add_argument("--ate-csv", help="write per-frame ATE table to this CSV")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="generate a synthetic labeled sequence")
    p.add_argument("--scene", choices=("corridor", "urban"), default="corridor")
    p.add_argument("--frames", type=int, default=20)
    p.add_argument("--step", type=float, default=1.0, help="meters per frame")
    p.add_argument("--noise", type=float, default=0.02, help="per-point noise sigma")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True, help="output sequence directory")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, CorruptFileError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
