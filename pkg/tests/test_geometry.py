"""Tests for point cloud primitives, rigid transforms and voxel/range-image ops."""

import numpy as np
import pytest

from helpers import random_pose, voxel_oracle
from lidarloc import (
    PointCloud,
    RigidTransform,
    axis_angle_rotation,
    merge_clouds,
    organize,
    rotation_angle,
    voxel_downsample,
)


class TestPointCloud:
    def test_rejects_nan(self):
        with pytest.raises(ValueError, match="NaN"):
            PointCloud([[0.0, 0.0, np.nan]])

    def test_rejects_label_length_mismatch(self):
        with pytest.raises(ValueError, match="labels length"):
            PointCloud([[0, 0, 0], [1, 1, 1]], labels=[40])

    def test_rejects_intensity_length_mismatch(self):
        with pytest.raises(ValueError, match="intensity length"):
            PointCloud([[0, 0, 0]], intensity=[0.1, 0.2])

    def test_empty_cloud_allowed(self):
        cloud = PointCloud(np.empty((0, 3)))
        assert len(cloud) == 0

    def test_arrays_are_immutable(self):
        cloud = PointCloud([[1.0, 2.0, 3.0]], labels=[40])
        with pytest.raises(ValueError):
            cloud.points[0, 0] = 9.0
        with pytest.raises(ValueError):
            cloud.labels[0] = 1

    def test_construction_copies_input(self):
        pts = np.ones((3, 3))
        cloud = PointCloud(pts)
        pts[0, 0] = 7.0
        assert cloud.points[0, 0] == 1.0

    def test_merge_keeps_labels_only_when_all_have_them(self):
        a = PointCloud([[0, 0, 0]], labels=[40])
        b = PointCloud([[1, 1, 1]], labels=[50])
        c = PointCloud([[2, 2, 2]])
        assert merge_clouds([a, b]).labels is not None
        assert merge_clouds([a, c]).labels is None


class TestRigidTransform:
    def test_rejects_non_rotation(self):
        with pytest.raises(ValueError, match="orthonormal"):
            RigidTransform(np.eye(3) * 2.0, np.zeros(3))

    def test_rejects_reflection(self):
        reflection = np.diag([1.0, 1.0, -1.0])
        with pytest.raises(ValueError, match="determinant"):
            RigidTransform(reflection, np.zeros(3))

    def test_compose_identity_law(self):
        pose = random_pose(np.random.default_rng(0))
        identity = RigidTransform.identity()
        np.testing.assert_allclose(identity.compose(pose).matrix(), pose.matrix())

    def test_compose_inverse_is_identity(self):
        pose = random_pose(np.random.default_rng(1))
        round_trip = pose.compose(pose.inverse())
        assert np.abs(round_trip.matrix() - np.eye(4)).max() < 1e-9

    @pytest.mark.parametrize("seed", range(5))
    def test_compose_matches_sequential_application(self, seed):
        rng = np.random.default_rng(seed)
        a, b = random_pose(rng), random_pose(rng)
        points = rng.uniform(-50.0, 50.0, (100, 3))
        sequential = a.apply(b.apply(points))
        composed = a.compose(b).apply(points)
        assert np.abs(sequential - composed).max() < 1e-9

    def test_apply_pure_translation(self):
        pose = RigidTransform(np.eye(3), [0.0, 0.0, 1.0])
        np.testing.assert_allclose(pose.apply(np.array([2.0, 2.0, 0.0])), [2.0, 2.0, 1.0])

    def test_apply_quarter_turn_about_z(self):
        pose = RigidTransform(axis_angle_rotation([0, 0, 1], np.pi / 2), np.zeros(3))
        result = pose.apply(np.array([1.0, 0.0, 0.0]))
        assert np.abs(result - np.array([0.0, 1.0, 0.0])).max() < 1e-12

    def test_apply_identity_leaves_cloud_unchanged(self):
        cloud = PointCloud([[1.0, 2.0, 3.0]], labels=[50], intensity=[0.5])
        out = cloud.transform(RigidTransform.identity())
        np.testing.assert_array_equal(out.points, cloud.points)
        np.testing.assert_array_equal(out.labels, cloud.labels)
        np.testing.assert_array_equal(out.intensity, cloud.intensity)

    @pytest.mark.parametrize("seed", range(3))
    def test_apply_preserves_pairwise_distances(self, seed):
        rng = np.random.default_rng(seed)
        pose = random_pose(rng)
        points = rng.uniform(-10.0, 10.0, (60, 3))
        moved = pose.apply(points)
        before = np.linalg.norm(points[:, None] - points[None, :], axis=-1)
        after = np.linalg.norm(moved[:, None] - moved[None, :], axis=-1)
        assert np.abs(before - after).max() < 1e-9

    def test_rotation_angle_recovers_axis_angle(self):
        rot = axis_angle_rotation([0.3, -0.5, 0.8], 0.7)
        assert rotation_angle(rot) == pytest.approx(0.7, abs=1e-12)


class TestVoxelDownsample:
    def test_rejects_non_positive_resolution(self):
        with pytest.raises(ValueError, match="resolution"):
            voxel_downsample(PointCloud([[0, 0, 0]]), 0.0)

    def test_single_point_is_its_own_centroid(self):
        out = voxel_downsample(PointCloud([[1.3, 2.7, 0.1]]), 1.0)
        np.testing.assert_allclose(out.points, [[1.3, 2.7, 0.1]])

    def test_unit_cube_corners_collapse_to_center(self):
        corners = [[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)]
        out = voxel_downsample(PointCloud(np.array(corners, dtype=float)), 2.0)
        np.testing.assert_allclose(out.points, [[0.5, 0.5, 0.5]])

    @pytest.mark.parametrize("seed", range(4))
    def test_matches_bucket_oracle(self, seed):
        rng = np.random.default_rng(seed)
        points = rng.uniform(0.0, 10.0, (1000, 3))
        out = voxel_downsample(PointCloud(points), 0.5)
        expected, _ = voxel_oracle(points, 0.5)
        got = out.points[np.lexsort(out.points.T)]
        expected = expected[np.lexsort(expected.T)]
        assert np.abs(got - expected).max() < 1e-9

    def test_majority_label_with_smallest_id_tiebreak(self):
        points = np.zeros((4, 3))
        out = voxel_downsample(PointCloud(points, labels=[81, 80, 81, 80]), 1.0)
        assert out.labels.tolist() == [80]  # tie broken by smallest ID
        out = voxel_downsample(PointCloud(points, labels=[81, 81, 80, 81]), 1.0)
        assert out.labels.tolist() == [81]

    @pytest.mark.parametrize("seed", range(3))
    def test_label_majority_matches_oracle(self, seed):
        rng = np.random.default_rng(seed)
        points = rng.uniform(-5.0, 5.0, (800, 3))
        labels = rng.choice([40, 50, 80], size=800)
        out = voxel_downsample(PointCloud(points, labels=labels), 1.0)
        expected_pts, expected_labels = voxel_oracle(points, 1.0, labels)
        order = np.lexsort(out.points.T)
        expected_order = np.lexsort(expected_pts.T)
        assert np.abs(out.points[order] - expected_pts[expected_order]).max() < 1e-9
        np.testing.assert_array_equal(
            out.labels[order], expected_labels[expected_order]
        )

    def test_negative_coordinates_use_mathematical_floor(self):
        out = voxel_downsample(PointCloud([[-0.1, -0.1, -0.1], [0.1, 0.1, 0.1]]), 1.0)
        assert len(out) == 2  # floor(-0.1) = -1, distinct voxel from floor(0.1) = 0

    def test_idempotent_at_fixed_resolution(self):
        rng = np.random.default_rng(9)
        cloud = PointCloud(rng.uniform(0.0, 8.0, (500, 3)))
        once = voxel_downsample(cloud, 0.7)
        twice = voxel_downsample(once, 0.7)
        assert len(twice) == len(once)

    @pytest.mark.parametrize("seed", range(3))
    def test_count_non_increasing_on_nested_resolutions(self, seed):
        # Monotonicity is asserted on multiplicatively nested ladders
        # (boundaries of the coarser grid are a subset of the finer one's),
        # which covers the registration schedule 0.2 / 1.0 / 5.0.
        rng = np.random.default_rng(seed)
        cloud = PointCloud(rng.uniform(-20.0, 20.0, (2000, 3)))
        for ladder in ((0.5, 1.0, 2.0, 4.0), (0.2, 1.0, 5.0)):
            counts = [len(voxel_downsample(cloud, r)) for r in ladder]
            assert all(a >= b for a, b in zip(counts, counts[1:]))

    def test_intensity_averaged_per_voxel(self):
        cloud = PointCloud(np.zeros((2, 3)), intensity=[0.2, 0.4])
        out = voxel_downsample(cloud, 1.0)
        assert out.intensity[0] == pytest.approx(0.3)


class TestOrganize:
    def test_rejects_small_grid(self):
        with pytest.raises(ValueError):
            organize(PointCloud([[1, 0, 0]]), rows=1, cols=10)

    def test_empty_cloud_gives_empty_grid(self):
        scan = organize(PointCloud(np.empty((0, 3))), rows=8, cols=16)
        assert (scan.grid == -1).all()

    def test_hand_evaluated_binning(self):
        # Elevation 0 with FOV [-15, 15] over 64 rows lands in row 32;
        # azimuth 0 over 2048 columns lands in column 1024.
        scan = organize(
            PointCloud([[10.0, 0.0, 0.0]]), rows=64, cols=2048, fov_deg=(-15.0, 15.0)
        )
        assert scan.grid[32, 1024] == 0

    def test_nearest_range_wins_collision(self):
        cloud = PointCloud([[8.0, 0.0, 0.0], [5.0, 0.0, 0.0]])
        scan = organize(cloud, rows=4, cols=8, fov_deg=(-10.0, 10.0))
        stored = scan.occupied_indices()
        assert stored.tolist() == [1]

    def test_origin_points_dropped(self):
        cloud = PointCloud([[1e-9, 0.0, 0.0], [5.0, 0.0, 0.0]])
        scan = organize(cloud, rows=4, cols=8, fov_deg=(-10.0, 10.0))
        assert scan.occupied_indices().tolist() == [1]

    def test_out_of_fov_points_dropped(self):
        cloud = PointCloud([[1.0, 0.0, 5.0]])  # elevation ~79 degrees
        scan = organize(cloud, rows=8, cols=8, fov_deg=(-15.0, 15.0))
        assert (scan.grid == -1).all()

    def test_azimuth_seam_wraps_to_column_zero(self):
        cloud = PointCloud([[-5.0, 0.0, 0.0]])  # azimuth exactly pi
        scan = organize(cloud, rows=4, cols=8, fov_deg=(-10.0, 10.0))
        row, col = np.argwhere(scan.grid >= 0)[0]
        assert col == 0

    @pytest.mark.parametrize("seed", range(3))
    def test_stored_indices_are_unique_subset(self, seed):
        rng = np.random.default_rng(seed)
        cloud = PointCloud(rng.uniform(-40.0, 40.0, (3000, 3)))
        scan = organize(cloud, rows=32, cols=256, fov_deg=(-25.0, 5.0))
        stored = scan.occupied_indices()
        assert len(np.unique(stored)) == len(stored)
        assert stored.min() >= 0 and stored.max() < len(cloud)
