"""Synthetic fixture generators and their analytic truth metadata."""

from __future__ import annotations

import numpy as np
import pytest

from pretouch.synthetic import (
    KINDS,
    FixtureSpec,
    fixture_area,
    fixture_truth,
    make_fixture,
)


class TestFixtureSpec:
    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            FixtureSpec(kind="torus")

    def test_bad_dimensions_rejected(self):
        with pytest.raises(ValueError):
            FixtureSpec(kind="plane", dimensions=(10.0,))
        with pytest.raises(ValueError):
            FixtureSpec(kind="disk", dimensions=(-3.0,))
        with pytest.raises(ValueError):
            FixtureSpec(kind="ring", dimensions=(3.0, 5.0))
        with pytest.raises(ValueError):
            FixtureSpec(kind="l_plate", dimensions=(4.0, 10.0))

    def test_bad_density_rejected(self):
        with pytest.raises(ValueError):
            FixtureSpec(kind="plane", sample_density=0.0)

    def test_defaults_fill_dimensions(self):
        assert FixtureSpec(kind="disk").dimensions == (5.0,)


class TestMakeFixture:
    def test_plane_count_and_flatness(self):
        spec = FixtureSpec(kind="plane", dimensions=(10.0, 10.0), sample_density=25.0)
        cloud = make_fixture(spec)
        assert abs(len(cloud) - 2500) <= 125
        assert np.all(cloud.points[:, 2] == cloud.points[0, 2])

    @pytest.mark.parametrize("kind", KINDS)
    def test_count_tracks_density_times_area(self, kind):
        spec = FixtureSpec(kind=kind, sample_density=25.0, seed=3)
        cloud = make_fixture(spec)
        expected = spec.sample_density * fixture_area(spec)
        assert abs(len(cloud) - expected) <= 0.05 * expected

    @pytest.mark.parametrize("kind", KINDS)
    def test_deterministic(self, kind):
        spec = FixtureSpec(kind=kind, seed=9)
        a = make_fixture(spec)
        b = make_fixture(spec)
        assert np.array_equal(a.points, b.points)

    def test_l_plate_points_inside_union_footprint(self):
        spec = FixtureSpec(kind="l_plate", dimensions=(10.0, 4.0))
        cloud = make_fixture(spec)
        # Shift back to the raw corner-at-origin frame of the two arms.
        corner = fixture_truth(spec).corners[0]
        raw = cloud.points[:, :2] - corner
        in_horizontal = (raw[:, 0] >= 0) & (raw[:, 0] <= 10) & (raw[:, 1] >= 0) & (raw[:, 1] <= 4)
        in_vertical = (raw[:, 0] >= 0) & (raw[:, 0] <= 4) & (raw[:, 1] >= 0) & (raw[:, 1] <= 10)
        assert np.all(in_horizontal | in_vertical)

    def test_disk_and_ring_radii(self):
        disk = make_fixture(FixtureSpec(kind="disk", dimensions=(5.0,)))
        r = np.hypot(disk.points[:, 0], disk.points[:, 1])
        assert r.max() <= 5.0

        ring = make_fixture(FixtureSpec(kind="ring", dimensions=(5.0, 3.5)))
        r = np.hypot(ring.points[:, 0], ring.points[:, 1])
        assert r.max() <= 5.0 and r.min() >= 3.5

    def test_box_top_height_profile(self):
        spec = FixtureSpec(kind="box_top", dimensions=(10.0, 10.0))
        cloud = make_fixture(spec)
        z = cloud.points[:, 2]
        assert z.min() == 0.0 and z.max() <= 2.5
        # Plateau interior sits at full height, outer rim on the base plane.
        inside_plateau = np.all(np.abs(cloud.points[:, :2]) <= 2.0, axis=1)
        assert np.all(z[inside_plateau] == 2.5)
        on_rim = np.any(np.abs(cloud.points[:, :2]) >= 4.2, axis=1)
        assert np.all(z[on_rim] == 0.0)
        # The bevel band in between actually slopes.
        bevel = ~inside_plateau & ~on_rim
        assert np.any((z[bevel] > 0) & (z[bevel] < 2.5))

    def test_l_plate_height_profile(self):
        spec = FixtureSpec(kind="l_plate", dimensions=(10.0, 4.0))
        cloud = make_fixture(spec)
        corner = fixture_truth(spec).corners[0]
        raw = cloud.points[:, :2] - corner
        z = cloud.points[:, 2]
        assert z.min() >= 0.0 and z.max() <= 2.5
        # Distance of each point to the nearest footprint edge, exploiting the
        # raw frame: the union boundary is x=0, y=0, the outer arm ends at 10,
        # and the two notch edges (rays from the concave corner (4, 4) along
        # +x at y=4 and along +y at x=4).
        x, y = raw[:, 0], raw[:, 1]
        d1 = np.hypot(np.maximum(4 - x, 0), np.abs(y - 4))
        d2 = np.hypot(np.abs(x - 4), np.maximum(4 - y, 0))
        d = np.minimum.reduce([x, y, 10 - np.maximum(x, y), d1, d2])
        expected = 2.5 * np.clip(d / 1.2, 0.0, 1.0)
        assert np.allclose(z, expected, atol=1e-9)
        # Both plateau and sloping bevel are populated.
        assert np.any(z == 2.5) and np.any((z > 0) & (z < 2.5))

    def test_asym_blob_varies_with_seed(self):
        a = make_fixture(FixtureSpec(kind="asym_blob", seed=1))
        b = make_fixture(FixtureSpec(kind="asym_blob", seed=2))
        assert a.points[:, 2].std() > 0.1
        assert a.points.shape != b.points.shape or not np.array_equal(a.points, b.points)
        assert np.all(a.points[:, 2] >= 0)


class TestFixtureTruth:
    def test_disk_continuous(self):
        assert fixture_truth(FixtureSpec(kind="disk")).symmetry == "continuous"
        assert fixture_truth(FixtureSpec(kind="ring")).symmetry == "continuous"

    def test_square_box_top_four_fold(self):
        assert fixture_truth(FixtureSpec(kind="box_top", dimensions=(10.0, 10.0))).symmetry == "cyclic-4"
        assert fixture_truth(FixtureSpec(kind="box_top", dimensions=(10.0, 6.0))).symmetry == "cyclic-2"

    def test_l_plate_concave_corner_at_arm_junction(self):
        spec = FixtureSpec(kind="l_plate", dimensions=(10.0, 4.0))
        truth = fixture_truth(spec)
        assert truth.symmetry == "trivial"
        # Junction sits at (width, width) in the raw frame whose origin is
        # the outer corner; outer corner is corners[0].
        raw_concave = truth.concave_corner - truth.corners[0]
        assert np.allclose(raw_concave, [4.0, 4.0])
        # The concave corner must sit strictly inside the footprint bbox.
        lo = truth.corners.min(axis=0)
        hi = truth.corners.max(axis=0)
        assert np.all(truth.concave_corner > lo) and np.all(truth.concave_corner < hi)

    def test_blob_trivial_symmetry(self):
        assert fixture_truth(FixtureSpec(kind="asym_blob")).symmetry == "trivial"
