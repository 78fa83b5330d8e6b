import math

import numpy as np
import pytest

from discrepancy.flows import (
    FlowOrbitSpec, capsule_volume, cylinder_count, cylinder_count_bruteforce, flow_discrepancy,
    flow_normalization, flow_time_in_body, flow_time_riemann, geodesic_ball_time, geodesic_normalization,
    normalized_flow_discrepancy, parse_box_density, sample_flow_discrepancy, sample_geodesic,
    slab_ellipsoid_count,
)
from geometry.convex_body import ball, ellipsoid, support_perturbation
from utils.errors import DomainError, UnsupportedDimensionError


class TestOccupationTime:

    def test_horizontal_line_through_center(self):
        body = ball(2, 1.0, center=[0.5, 0.5])
        spec = FlowOrbitSpec(body, r=0.25, v=[1.0, 0.0], x=[0.5, 0.5], T=1.0)
        assert flow_time_in_body(spec) == pytest.approx(0.5)
        assert flow_discrepancy(spec) == pytest.approx(0.5 - math.pi / 16)

    def test_zero_time(self):
        spec = FlowOrbitSpec(ball(2), r=0.25, v=[1.0, 0.3], x=[0.1, 0.2], T=0.0)
        assert flow_time_in_body(spec) == 0.0
        assert normalized_flow_discrepancy(spec) == 0.0

    def test_overlapping_translates_count_twice(self):
        # radius 0.6 disks overlap their neighbours along the x axis
        spec = FlowOrbitSpec(ball(2), r=0.6, v=[1.0, 0.0], x=[0.0, 0.0], T=1.0)
        assert flow_time_in_body(spec) == pytest.approx(1.2)

    @pytest.mark.parametrize("body", [
        ellipsoid(np.diag([0.04, 0.01]), center=[0.5, 0.5]),
        pytest.param(support_perturbation(np.eye(2) * 0.04, [(3, 0.005, 0.002)], center=[0.5, 0.5]),
                     marks=pytest.mark.slow),
    ])
    def test_matches_riemann_sum(self, body):
        spec = FlowOrbitSpec(body, r=1.0, v=[1.0, math.sqrt(2.0)], x=[0.13, 0.71], T=7.0)
        assert flow_time_in_body(spec) == pytest.approx(flow_time_riemann(spec, relative_step=1e-5), abs=1e-3)

    def test_direction_must_be_nonzero(self):
        with pytest.raises(DomainError):
            FlowOrbitSpec(ball(2), r=0.25, v=[0.0, 0.0], x=[0.0, 0.0], T=1.0)


class TestNormalization:

    def test_planar_flow_is_unnormalized(self):
        assert flow_normalization(2, 0.3, 100.0) == 1.0

    def test_high_dimension(self):
        assert flow_normalization(5, 0.25, 16.0) == pytest.approx(0.25 ** 2 * 16.0 ** 0.25)

    def test_three_dimensions_unsupported(self):
        with pytest.raises(UnsupportedDimensionError):
            flow_normalization(3, 0.3, 10.0)
        spec = FlowOrbitSpec(ball(3), r=0.2, v=[1.0, 0.5, 0.3], x=[0.1, 0.2, 0.3], T=1.0)
        with pytest.raises(UnsupportedDimensionError):
            flow_discrepancy(spec)


class TestCylinder:

    def test_vertical_unit_segment(self):
        count, discrepancy = cylinder_count([0.0, 0.0], [0.0, 1.0], 0.1, 1.0)
        assert count == 2
        assert discrepancy == pytest.approx(2 - (0.2 + 0.01 * math.pi))

    def test_capsule_volume(self):
        assert capsule_volume(3, 0.5, 2.0) == pytest.approx(math.pi * 0.25 * 2.0 + 4.0 / 3.0 * math.pi * 0.125)

    def test_matches_bounding_box_scan(self, rng):
        for _ in range(20):
            n = int(rng.choice([2, 3]))
            v = rng.normal(size=n)
            y = rng.random(n)
            r, T = float(rng.uniform(0.05, 0.5)), float(rng.uniform(0.5, 5.0))
            assert cylinder_count(y, v, r, T)[0] == cylinder_count_bruteforce(y, v, r, T)

    def test_slab_clipped_count_matches_ellipsoid_sum(self, rng):
        for _ in range(10):
            alpha = rng.uniform(-1.0, 1.0, size=2)
            x = rng.random(2)
            r, T = float(rng.uniform(0.05, 0.3)), float(rng.uniform(1.0, 8.0))
            clipped, _ = cylinder_count(np.append(x, 0.0), np.append(alpha, 1.0), r, T, caps=False)
            assert clipped == slab_ellipsoid_count(x, alpha, r, T)
            assert clipped == cylinder_count_bruteforce(np.append(x, 0.0), np.append(alpha, 1.0), r, T, caps=False)

    def test_invalid_segment(self):
        with pytest.raises(DomainError):
            cylinder_count([0.0, 0.0], [0.0, 0.0], 0.1, 1.0)
        with pytest.raises(DomainError):
            cylinder_count([0.0, 0.0], [0.0, 1.0], -0.1, 1.0)


class TestGeodesic:

    def test_radius_range(self):
        with pytest.raises(DomainError):
            geodesic_ball_time(1.5, [1.0, 0.5], [0.1, 0.2], [0.5, 0.5], 10.0)

    def test_three_dimensions_unsupported(self):
        with pytest.raises(UnsupportedDimensionError):
            geodesic_ball_time(0.2, [1.0, 0.5, 0.3], [0.1, 0.2, 0.3], [0.5, 0.5, 0.5], 10.0)

    def test_planar_time(self):
        result = geodesic_ball_time(0.25, [1.0, 0.0], [0.5, 0.5], [0.5, 0.5], 1.0)
        assert result.time == pytest.approx(0.5)
        assert result.normalized == pytest.approx(result.raw)

    def test_normalization_in_four_dimensions(self):
        expected = 2.0 ** (5.0 / 6.0) / (0.3 ** 1.5 * 100.0 ** (1.0 / 6.0))
        assert geodesic_normalization(4, 0.3, 2.0, 100.0) == pytest.approx(expected)


class TestSamplers:

    def test_flow_sampler_columns(self):
        frame = sample_flow_discrepancy(ball(2, 1.0, center=[0.5, 0.5]), 0.2, 0.4, T=10.0, samples=3, seed=4)
        assert list(frame.columns) == ["sample_id", "r", "v1", "v2", "x1", "x2", "raw_discrepancy", "normalized"]
        assert np.allclose(frame["normalized"], frame["raw_discrepancy"])

    def test_fixed_velocity(self):
        frame = sample_flow_discrepancy(ball(2, 1.0, center=[0.5, 0.5]), 0.2, 0.4, T=5.0, samples=2, seed=4,
                                        v=[1.0, math.sqrt(2.0)])
        assert np.allclose(frame["v2"], math.sqrt(2.0))

    def test_geodesic_sampler(self):
        frame = sample_geodesic(4, 0.2, 0.4, T=20.0, samples=2, seed=8)
        assert len(frame) == 2
        assert frame["v1"].between(0.5, 1.5).all()

    def test_box_density(self):
        assert parse_box_density("box:0.5,1.5") == (0.5, 1.5)
        with pytest.raises(DomainError):
            parse_box_density("box:2,1")
