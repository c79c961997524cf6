"""Tests for local map extraction, velocity prediction and the four-step localizer."""

import numpy as np
import pytest

from conftest import pipeline_config
from lidarloc import (
    GateParams,
    LocalizerConfig,
    LocalizerState,
    MapLocalizer,
    PointCloud,
    RigidTransform,
    Trajectory,
    absolute_translation_error,
    extract_local_map,
    localize_sequence,
    predict_pose,
    rotation_angle,
)


class TestExtractLocalMap:
    def test_radius_covering_everything(self):
        cloud = PointCloud(np.random.default_rng(0).uniform(-5, 5, (100, 3)))
        out = extract_local_map(cloud, np.zeros(3), 100.0)
        assert len(out) == len(cloud)

    def test_far_center_gives_empty(self):
        cloud = PointCloud(np.random.default_rng(1).uniform(-5, 5, (100, 3)))
        out = extract_local_map(cloud, np.array([500.0, 0.0, 0.0]), 10.0)
        assert len(out) == 0

    @pytest.mark.parametrize("seed", range(3))
    def test_matches_linear_scan(self, seed):
        rng = np.random.default_rng(seed)
        points = rng.uniform(-60, 60, (10000, 3))
        labels = rng.choice([40, 50, 80], size=10000)
        cloud = PointCloud(points, labels=labels)
        center = rng.uniform(-20, 20, 3)
        out = extract_local_map(cloud, center, 30.0)
        mask = np.linalg.norm(points - center, axis=1) <= 30.0
        np.testing.assert_allclose(
            np.sort(out.points, axis=0), np.sort(points[mask], axis=0)
        )
        assert len(out.labels) == mask.sum()

    def test_non_positive_radius_rejected(self):
        with pytest.raises(ValueError):
            extract_local_map(PointCloud([[0, 0, 0]]), np.zeros(3), 0.0)


class TestPredictPose:
    def test_single_pose_predicts_itself(self):
        pose = RigidTransform(np.eye(3), [1.0, 2.0, 3.0])
        state = LocalizerState(accepted_poses=[pose])
        predicted = predict_pose(state, 4)
        np.testing.assert_array_equal(predicted.matrix(), pose.matrix())

    def test_constant_velocity_extrapolation(self):
        poses = [RigidTransform(np.eye(3), [float(x), 0, 0]) for x in range(5)]
        predicted = predict_pose(LocalizerState(accepted_poses=poses), 4)
        np.testing.assert_allclose(predicted.translation, [5.0, 0.0, 0.0])
        np.testing.assert_array_equal(predicted.rotation, np.eye(3))

    def test_hand_averaged_deltas(self):
        xs = [(2.0, 1.0, 0.0), (3.0, 1.0, 0.0), (3.0, 2.0, 0.0), (4.0, 2.0, 0.0), (4.0, 3.0, 0.0)]
        # deltas: (1,0,0), (0,1,0), (1,0,0), (0,1,0); mean (0.5, 0.5, 0)
        poses = [RigidTransform(np.eye(3), t) for t in xs]
        predicted = predict_pose(LocalizerState(accepted_poses=poses), 4)
        np.testing.assert_allclose(predicted.translation, [4.5, 3.5, 0.0])

    def test_window_shorter_history(self):
        poses = [RigidTransform(np.eye(3), [0.0, 0, 0]), RigidTransform(np.eye(3), [2.0, 0, 0])]
        predicted = predict_pose(LocalizerState(accepted_poses=poses), 4)
        np.testing.assert_allclose(predicted.translation, [4.0, 0.0, 0.0])

    def test_empty_history_rejected(self):
        with pytest.raises(ValueError, match="history"):
            predict_pose(LocalizerState(), 4)


class TestLocalizerConfig:
    def test_rejects_bad_steps(self):
        with pytest.raises(ValueError, match="enabled_steps"):
            LocalizerConfig(enabled_steps=frozenset({0, 1}))
        with pytest.raises(ValueError, match="enabled_steps"):
            LocalizerConfig(enabled_steps=frozenset())

    def test_rejects_bad_radius(self):
        with pytest.raises(ValueError, match="local_map_radius"):
            LocalizerConfig(local_map_radius=0.0)


class TestMapLocalizer:
    def test_unlabeled_frame_rejected(self, corridor_maps, corridor_frames, corridor_spec):
        localizer = MapLocalizer(
            corridor_maps, corridor_frames[0][1],
            config=LocalizerConfig(range_image=corridor_spec),
        )
        bare = PointCloud(corridor_frames[1][0].points)
        with pytest.raises(ValueError, match="labels"):
            localizer.localize(bare)

    def test_stationary_vehicle_is_fixed_point(self, corridor_maps, corridor_frames, corridor_spec):
        cloud, pose = corridor_frames[5]
        localizer = MapLocalizer(
            corridor_maps, pose,
            config=pipeline_config(corridor_spec),
            initial_frame=cloud,
        )
        estimated, diags = localizer.localize(cloud)
        assert np.linalg.norm(estimated.translation - pose.translation) < 0.01
        assert np.degrees(rotation_angle(estimated.rotation, pose.rotation)) < 0.1
        assert len(diags) == 4

    def test_first_frame_without_cache_skips_step2(self, corridor_maps, corridor_frames, corridor_spec):
        cloud, pose = corridor_frames[3]
        localizer = MapLocalizer(
            corridor_maps, pose, config=LocalizerConfig(range_image=corridor_spec)
        )
        _, diags = localizer.localize(cloud)
        step2 = next(d for d in diags if d.step == 2)
        assert not step2.ran
        assert "previous" in step2.reason
        # second call has the cache
        _, diags = localizer.localize(cloud)
        step2 = next(d for d in diags if d.step == 2)
        assert step2.ran

    def test_empty_local_map_skips_steps(self, corridor_maps, corridor_frames, corridor_spec):
        cloud, pose = corridor_frames[4]
        far = RigidTransform(pose.rotation, pose.translation + [10000.0, 0.0, 0.0])
        localizer = MapLocalizer(
            corridor_maps, far,
            config=LocalizerConfig(range_image=corridor_spec, enabled_steps=frozenset({3, 4})),
            initial_frame=cloud,
        )
        _, diags = localizer.localize(cloud)
        assert not next(d for d in diags if d.step == 3).ran
        assert "empty local map" in next(d for d in diags if d.step == 3).reason
        assert not next(d for d in diags if d.step == 4).ran

    def test_disabled_steps_fall_through(self, corridor_maps, corridor_frames, corridor_spec):
        cloud, pose = corridor_frames[6]
        localizer = MapLocalizer(
            corridor_maps, pose,
            config=LocalizerConfig(range_image=corridor_spec, enabled_steps=frozenset({1})),
            initial_frame=cloud,
        )
        estimated, diags = localizer.localize(cloud)
        # only step 1 ran; with a single pose in history the prediction is the pose itself
        np.testing.assert_array_equal(estimated.matrix(), pose.matrix())
        assert [d.ran for d in diags] == [True, False, False, False]

    def test_gate_safety_all_steps_rejected(self, corridor_maps, corridor_frames, corridor_spec):
        # A microscopic gate rejects every registration result, so the
        # output pose must equal the step-1 prediction.
        cloud, pose = corridor_frames[7]
        tiny_gate = GateParams(max_translation_change=1e-6, max_rotation_change=1e-6)
        localizer = MapLocalizer(
            corridor_maps, pose,
            config=LocalizerConfig(range_image=corridor_spec, gate=tiny_gate),
            initial_frame=corridor_frames[6][0],
        )
        estimated, diags = localizer.localize(cloud)
        # registration steps are either gate-rejected or numerical no-ops,
        # so the output cannot leave the step-1 prediction
        assert np.abs(estimated.matrix() - pose.matrix()).max() < 1e-12
        for diag in diags:
            if diag.step > 1 and diag.accepted:
                assert np.abs(diag.result.pose.matrix() - pose.matrix()).max() < 1e-9

    def test_determinism(self, corridor_maps, corridor_frames, corridor_spec):
        def run():
            traj = localize_sequence(
                [f for f, _ in corridor_frames[:8]], corridor_maps,
                initial_pose=corridor_frames[0][1],
                config=LocalizerConfig(range_image=corridor_spec),
            )
            return np.array([p.matrix() for p in traj])

        first, second = run(), run()
        assert np.array_equal(first, second)

    def test_full_pipeline_tracks_short_sequence(self, corridor_maps, corridor_frames, corridor_spec):
        frames = corridor_frames
        gt = Trajectory(tuple(p for _, p in frames))
        config = pipeline_config(corridor_spec)
        traj = localize_sequence(
            [f for f, _ in frames], corridor_maps, initial_pose=frames[0][1], config=config
        )
        ate = absolute_translation_error(gt, Trajectory(tuple(traj)))
        assert ate.mean <= 0.05

    def test_map_steps_beat_pure_odometry(self, corridor_maps, corridor_frames, corridor_spec):
        frames = corridor_frames
        gt = Trajectory(tuple(p for _, p in frames))

        def run(steps):
            config = pipeline_config(corridor_spec, enabled_steps=steps)
            traj = localize_sequence(
                [f for f, _ in frames], corridor_maps,
                initial_pose=frames[0][1], config=config,
            )
            return absolute_translation_error(gt, Trajectory(tuple(traj))).mean

        assert run(frozenset({1, 2})) > run(frozenset({1, 2, 3, 4}))

    def test_step4_rmse_not_worse_than_step2(self, corridor_maps, corridor_frames, corridor_spec):
        # Median final-stage residual of the map-anchored step should not
        # exceed the odometry step's residual.
        localizer = MapLocalizer(
            corridor_maps, corridor_frames[0][1],
            config=pipeline_config(corridor_spec),
            initial_frame=corridor_frames[0][0],
        )
        rmse2, rmse4 = [], []
        for cloud, _ in corridor_frames[1:12]:
            _, diags = localizer.localize(cloud)
            for diag in diags:
                if diag.result is None or not diag.accepted:
                    continue
                if diag.step == 2:
                    rmse2.append(diag.result.inlier_rmse)
                elif diag.step == 4:
                    rmse4.append(diag.result.inlier_rmse)
        assert np.median(rmse4) <= np.median(rmse2)
