"""Tests for point-cloud distance, union volumes, and strip thickening."""

import math

import numpy as np
import pytest

from fatflat.flats import (
    ConvexBody,
    DegenerateBodyError,
    FlatBox2D,
    FramedStrip2D,
    Isometry,
    ParallelStripsError,
    PointCloud,
    hausdorff_distance,
    thicken_strips,
    union_volume,
)


def circle_cloud(radius, count, center=(0.0, 0.0)):
    angles = 2.0 * math.pi * np.arange(count) / count
    points = np.stack([radius * np.cos(angles), radius * np.sin(angles)],
                      axis=1)
    return PointCloud(points + np.asarray(center))


def brute_force_hausdorff(first, second):
    d_xy = max(min(float(np.linalg.norm(x - y)) for y in second.points)
               for x in first.points)
    d_yx = max(min(float(np.linalg.norm(x - y)) for x in first.points)
               for y in second.points)
    return max(d_xy, d_yx)


def unit_square():
    return ConvexBody([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def regular_polygon(sides, radius=1.0):
    angles = 2.0 * math.pi * np.arange(sides) / sides
    return ConvexBody(np.stack([radius * np.cos(angles),
                                radius * np.sin(angles)], axis=1))


class TestPointCloud:
    def test_rows_dimension_and_size(self):
        cloud = PointCloud([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        assert cloud.dimension == 2
        assert cloud.size == 3

    def test_one_dimensional_input_becomes_column(self):
        cloud = PointCloud([0.0, 1.0, 2.0])
        assert cloud.dimension == 1
        assert cloud.size == 3

    def test_empty_and_non_finite_rejected(self):
        with pytest.raises(ValueError):
            PointCloud(np.empty((0, 2)))
        with pytest.raises(ValueError):
            PointCloud([[0.0, math.nan]])

    def test_from_csv(self, tmp_path):
        path = tmp_path / "cloud.csv"
        path.write_text("0.0,1.0\n2.0,3.0\n")
        cloud = PointCloud.from_csv(path)
        assert cloud.size == 2
        assert np.array_equal(cloud.points, [[0.0, 1.0], [2.0, 3.0]])


class TestHausdorffDistance:
    def test_single_points(self):
        first = PointCloud([[0.0, 0.0]])
        second = PointCloud([[3.0, 4.0]])
        assert hausdorff_distance(first, second) == 5.0

    def test_concentric_circle_samples(self):
        inner = circle_cloud(1.0, 360)
        outer = circle_cloud(2.0, 360)
        distance = hausdorff_distance(inner, outer)
        assert abs(distance - 1.0) <= 2.0 * math.pi / 360.0

    def test_matches_brute_force_double_loop(self):
        rng = np.random.default_rng(9)
        first = PointCloud(rng.random((50, 2)))
        second = PointCloud(rng.random((50, 2)))
        fast = hausdorff_distance(first, second)
        assert fast == pytest.approx(brute_force_hausdorff(first, second),
                                     rel=1e-14)

    def test_zero_exactly_for_equal_sets(self):
        rng = np.random.default_rng(4)
        points = rng.random((20, 3))
        cloud = PointCloud(points)
        shuffled = PointCloud(points[rng.permutation(20)])
        assert hausdorff_distance(cloud, shuffled) == 0.0
        assert hausdorff_distance(cloud, cloud) == 0.0

    def test_metric_axioms_on_random_triples(self):
        rng = np.random.default_rng(21)
        for _ in range(200):
            x = PointCloud(rng.normal(size=(8, 2)))
            y = PointCloud(rng.normal(size=(8, 2)))
            z = PointCloud(rng.normal(size=(8, 2)))
            d_xy = hausdorff_distance(x, y)
            d_yx = hausdorff_distance(y, x)
            d_yz = hausdorff_distance(y, z)
            d_xz = hausdorff_distance(x, z)
            assert d_xy == d_yx
            assert d_xy > 0.0
            assert d_xz <= d_xy + d_yz + 1e-12

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            hausdorff_distance(PointCloud([[0.0, 0.0]]),
                               PointCloud([[0.0, 0.0, 0.0]]))


class TestIsometry:
    def test_pure_translation_part_is_its_norm(self):
        motion = Isometry.translation_by([3.0, 4.0])
        assert motion.translational_part() == pytest.approx(5.0, rel=1e-12)

    def test_rotation_about_any_center_has_zero_part(self):
        for center in (None, (0.5, 0.5), (-2.0, 7.0)):
            motion = Isometry.rotation_2d(0.7, center=center)
            assert motion.translational_part() == pytest.approx(0.0,
                                                                abs=1e-9)

    def test_glide_reflection_keeps_parallel_component(self):
        glide = Isometry(np.array([[1.0, 0.0], [0.0, -1.0]]),
                         np.array([2.0, 0.3]))
        assert glide.translational_part() == pytest.approx(2.0, rel=1e-12)

    def test_apply_moves_points(self):
        quarter = Isometry.rotation_2d(math.pi / 2.0)
        moved = quarter.apply(np.array([[1.0, 0.0]]))
        assert np.allclose(moved, [[0.0, 1.0]], atol=1e-15)

    def test_rotation_about_center_fixes_center(self):
        center = np.array([0.4, -1.2])
        motion = Isometry.rotation_2d(1.1, center=center)
        assert np.allclose(motion.apply(center[None, :]), center[None, :],
                           atol=1e-14)

    def test_non_orthogonal_matrix_rejected(self):
        with pytest.raises(ValueError):
            Isometry(np.array([[1.0, 0.5], [0.0, 1.0]]), np.zeros(2))
        with pytest.raises(ValueError):
            Isometry(np.eye(3), np.zeros(2))


class TestConvexBody:
    def test_square_volume_and_membership(self):
        body = unit_square()
        assert body.volume == pytest.approx(1.0, rel=1e-12)
        inside = body.contains(np.array([[0.5, 0.5], [0.999, 0.001]]))
        outside = body.contains(np.array([[1.5, 0.5], [-0.01, 0.5]]))
        assert inside.all()
        assert not outside.any()

    def test_interval_body_in_one_dimension(self):
        body = ConvexBody(np.array([[0.0], [2.0]]))
        assert body.volume == 2.0
        assert body.contains(np.array([[1.5]]))[0]
        assert not body.contains(np.array([[2.5]]))[0]

    def test_tetrahedron_volume(self):
        body = ConvexBody([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0],
                           [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        assert body.volume == pytest.approx(1.0 / 6.0, rel=1e-12)

    def test_degenerate_bodies_rejected(self):
        with pytest.raises(DegenerateBodyError):
            ConvexBody([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
        with pytest.raises(DegenerateBodyError):
            ConvexBody(np.array([[1.0], [1.0]]))

    def test_unsupported_dimension_rejected(self):
        with pytest.raises(ValueError):
            ConvexBody(np.eye(4))

    def test_transformed_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            unit_square().transformed(Isometry(np.eye(3), np.zeros(3)))

    def test_from_csv(self, tmp_path):
        path = tmp_path / "square.csv"
        path.write_text("0,0\n1,0\n1,1\n0,1\n")
        assert ConvexBody.from_csv(path).volume == pytest.approx(1.0,
                                                                 rel=1e-12)


class TestUnionVolume:
    def test_half_shifted_square_recovers_both_areas(self):
        report = union_volume(unit_square(),
                              Isometry.translation_by([0.5, 0.0]),
                              samples=10 ** 6, seed=0)
        assert report.box_volume == pytest.approx(1.5, rel=1e-12)
        assert abs(report.body_volume - 1.0) <= 3.0 * report.body_error
        assert abs(report.union_volume - 1.5) <= 3.0 * report.union_error
        assert 0.0 < report.body_error < 0.01
        assert report.samples == 10 ** 6

    def test_quarter_turn_about_center_changes_nothing(self):
        motion = Isometry.rotation_2d(math.pi / 2.0, center=(0.5, 0.5))
        report = union_volume(unit_square(), motion, samples=2 * 10 ** 5,
                              seed=3)
        assert report.union_volume == report.body_volume
        assert report.gain == 0.0

    def test_union_never_smaller_than_body(self):
        motions = [Isometry.translation_by([0.2, -0.1]),
                   Isometry.rotation_2d(0.3, center=(0.2, 0.9)),
                   Isometry.translation_by([0.0, 0.0])]
        for seed, motion in enumerate(motions):
            report = union_volume(unit_square(), motion,
                                  samples=10 ** 5, seed=seed)
            assert report.union_volume >= report.body_volume

    def test_nudged_polygon_gain_matches_disk_lens_formula(self):
        shift = 0.01
        report = union_volume(regular_polygon(256),
                              Isometry.translation_by([0.0, shift]),
                              samples=10 ** 6, seed=1)
        # overlap of two unit disks at center distance d is the lens
        # 2 acos(d/2) - (d/2) sqrt(4 - d^2); the union gain over one disk
        # is pi minus that, and a 256-gon tracks the disk to ~1e-4
        lens = (2.0 * math.acos(0.5 * shift)
                - 0.5 * shift * math.sqrt(4.0 - shift * shift))
        expected_gain = math.pi - lens
        assert report.gain > 0.0
        assert report.gain == pytest.approx(expected_gain, abs=1.5e-3)

    def test_repeat_runs_are_bitwise_identical(self):
        motion = Isometry.translation_by([0.3, 0.2])
        first = union_volume(unit_square(), motion, samples=2 * 10 ** 5,
                             seed=11)
        second = union_volume(unit_square(), motion, samples=2 * 10 ** 5,
                              seed=11)
        assert first.body_volume == second.body_volume
        assert first.union_volume == second.union_volume
        assert first.body_error == second.body_error

    def test_result_independent_of_worker_count(self, monkeypatch):
        motion = Isometry.translation_by([0.4, 0.1])
        monkeypatch.setenv("FATFLAT_THREADS", "1")
        serial = union_volume(unit_square(), motion, samples=3 * 10 ** 5,
                              seed=7)
        monkeypatch.setenv("FATFLAT_THREADS", "4")
        threaded = union_volume(unit_square(), motion, samples=3 * 10 ** 5,
                                seed=7)
        assert serial.body_volume == threaded.body_volume
        assert serial.union_volume == threaded.union_volume

    def test_nonpositive_samples_rejected(self):
        with pytest.raises(ValueError):
            union_volume(unit_square(), Isometry.translation_by([0.1, 0.0]),
                         samples=0)


class TestFramedStrip:
    def test_contains_measures_distance_to_center_line(self):
        strip = FramedStrip2D(angle=0.0, half_width=1.0,
                              offset=np.array([0.0, 0.0]))
        hits = strip.contains(np.array([[5.0, 0.5], [-3.0, -0.999],
                                        [0.0, 1.2]]))
        assert hits.tolist() == [True, True, False]

    def test_signed_distance_uses_normal_side(self):
        strip = FramedStrip2D(angle=0.0, half_width=0.5,
                              offset=np.array([1.0, 2.0]))
        signed = strip.signed_distance(np.array([[0.0, 3.0], [0.0, 1.0]]))
        assert signed == pytest.approx([1.0, -1.0])

    def test_nonpositive_width_rejected(self):
        with pytest.raises(ValueError):
            FramedStrip2D(angle=0.0, half_width=0.0,
                          offset=np.array([0.0, 0.0]))


class TestFlatBox:
    def test_corners_and_grid_stay_inside_box(self):
        box = FlatBox2D(center=np.array([1.0, -2.0]), angle=0.3,
                        length=4.0, cross_section=0.5)
        assert box.contains(box.corners(), tol=1e-12).all()
        grid = box.grid_points(20, 10)
        assert grid.shape == (200, 2)
        assert box.contains(grid, tol=1e-12).all()

    def test_degenerate_extents_rejected(self):
        with pytest.raises(ValueError):
            FlatBox2D(center=np.zeros(2), angle=0.0, length=0.0,
                      cross_section=1.0)


class TestThickenStrips:
    def test_coincident_centers_small_angle(self):
        first = FramedStrip2D(angle=0.0, half_width=1.0, offset=np.zeros(2))
        second = FramedStrip2D(angle=0.01, half_width=1.0,
                               offset=np.zeros(2))
        box = thicken_strips(first, second)
        assert box.cross_section >= 2.25
        assert box.cross_section == pytest.approx(2.25, rel=1e-12)
        assert box.length == pytest.approx((2.0 - 0.25) / math.tan(0.01),
                                           rel=1e-12)

    def test_box_lies_inside_the_union_of_strips(self):
        first = FramedStrip2D(angle=0.0, half_width=1.0, offset=np.zeros(2))
        second = FramedStrip2D(angle=0.01, half_width=1.0,
                               offset=np.zeros(2))
        box = thicken_strips(first, second)
        grid = box.grid_points(100, 100)
        covered = first.contains(grid, tol=1e-9) | second.contains(grid,
                                                                   tol=1e-9)
        assert covered.all()

    def test_generic_offset_mirrored_pair_stays_covered(self):
        first = FramedStrip2D(angle=0.4, half_width=0.8,
                              offset=np.array([0.3, -0.2]))
        second = FramedStrip2D(angle=0.4 - 0.006, half_width=1.3,
                               offset=np.array([1.7, 0.5]))
        box = thicken_strips(first, second)
        assert box.cross_section == pytest.approx(2 * 0.8 + 0.25 * 0.8,
                                                  rel=1e-12)
        assert box.length == pytest.approx(
            (2 * 1.3 - 0.25 * 0.8) / math.tan(0.006), rel=1e-12)
        grid = box.grid_points(100, 100)
        covered = first.contains(grid, tol=1e-9) | second.contains(grid,
                                                                   tol=1e-9)
        assert covered.all()

    def test_length_ratio_grows_at_least_tenfold(self):
        def length_at(theta):
            first = FramedStrip2D(angle=0.0, half_width=1.0,
                                  offset=np.zeros(2))
            second = FramedStrip2D(angle=theta, half_width=1.0,
                                   offset=np.zeros(2))
            return thicken_strips(first, second).length

        assert length_at(0.001) >= 10.0 * length_at(0.01)

    def test_length_strictly_grows_as_angle_shrinks(self):
        lengths = [
            thicken_strips(
                FramedStrip2D(angle=0.0, half_width=1.0,
                              offset=np.zeros(2)),
                FramedStrip2D(angle=theta, half_width=1.0,
                              offset=np.zeros(2)),
            ).length
            for theta in (0.1, 0.05, 0.02, 0.01, 0.005)
        ]
        assert all(a < b for a, b in zip(lengths, lengths[1:]))

    def test_parallel_strips_rejected(self):
        first = FramedStrip2D(angle=0.2, half_width=1.0, offset=np.zeros(2))
        same = FramedStrip2D(angle=0.2, half_width=1.0,
                             offset=np.array([0.0, 0.5]))
        opposite = FramedStrip2D(angle=0.2 + math.pi, half_width=1.0,
                                 offset=np.array([0.0, 0.5]))
        with pytest.raises(ParallelStripsError):
            thicken_strips(first, same)
        with pytest.raises(ParallelStripsError):
            thicken_strips(first, opposite)

    def test_wide_angle_rejected(self):
        first = FramedStrip2D(angle=0.0, half_width=1.0, offset=np.zeros(2))
        second = FramedStrip2D(angle=1.0, half_width=1.0, offset=np.zeros(2))
        with pytest.raises(ValueError):
            thicken_strips(first, second)
