import math

import numpy as np
import pytest

from geometry.convex_body import (
    ball, body_from_dict, body_to_dict, boundary_point, contains, curvature_at_normal,
    curvature_from_support, draw_section_alpha, ellipsoid, fits_unit_cube, gauge, gauge_precise, scaled,
    scaled_volume, section_alpha_bound, slanted_cylinder_section, support, support_perturbation,
    unit_ball_volume, volume,
)
from utils.errors import DomainError


class TestConstruction:

    def test_ball_defaults_to_origin(self):
        body = ball(3)
        assert body.kind == "ball"
        assert body.symmetric
        assert np.array_equal(body.center, np.zeros(3))
        assert body.radius == pytest.approx(1.0)

    def test_bodies_are_immutable(self):
        body = ball(2, 0.5)
        with pytest.raises(ValueError):
            body.sigma[0, 0] = 3.0

    def test_rejects_non_positive_definite_shape(self):
        with pytest.raises(DomainError):
            ellipsoid(np.diag([1.0, -1.0]))

    def test_rejects_bad_radius(self):
        with pytest.raises(DomainError):
            ball(2, 0.0)

    def test_odd_harmonic_breaks_symmetry(self):
        assert support_perturbation(np.eye(2), [(2, 0.05, 0.0)]).symmetric
        assert not support_perturbation(np.eye(2), [(3, 0.05, 0.0)]).symmetric

    def test_large_perturbation_is_rejected(self):
        with pytest.raises(DomainError):
            support_perturbation(np.eye(2), [(3, 0.2, 0.0)])

    def test_curvature_floor_follows_the_config(self, lab_config):
        # 1 + 0.05 cos 3phi has minimum curvature 1 / 1.4
        support_perturbation(np.eye(2), [(3, 0.05, 0.0)])
        lab_config.set('bodies.min_curvature', 0.8)
        with pytest.raises(DomainError):
            support_perturbation(np.eye(2), [(3, 0.05, 0.0)])

    def test_first_order_harmonics_are_rejected(self):
        with pytest.raises(DomainError):
            support_perturbation(np.eye(2), [(1, 0.05, 0.0)])

    def test_slanted_section_at_zero_is_a_ball(self):
        body = slanted_cylinder_section([0.0, 0.0])
        assert body.kind == "ball"

    def test_slanted_section_shape(self):
        body = slanted_cylinder_section([1.0, 0.0])
        assert body.kind == "ellipsoid"
        assert np.allclose(body.sigma, np.diag([2.0, 1.0]))

    def test_section_alpha_bound(self):
        assert section_alpha_bound(0.4) == pytest.approx(0.75)
        with pytest.raises(DomainError):
            section_alpha_bound(0.5)

    def test_drawn_sections_fit_at_the_largest_scale(self, rng):
        for _ in range(10):
            alpha, rejected = draw_section_alpha(rng, 2, 0.4)
            assert rejected >= 0
            assert fits_unit_cube(slanted_cylinder_section(alpha), 0.4)

    def test_unconditioned_draw(self, rng):
        alpha, rejected = draw_section_alpha(rng, 3)
        assert alpha.shape == (3,) and rejected == 0


class TestSupportAndCurvature:

    def test_support_of_ball(self):
        assert support(ball(2), [3.0, 4.0]) == pytest.approx(5.0)

    def test_support_includes_center(self):
        body = ball(2, 1.0, center=[0.5, 0.5])
        assert support(body, [1.0, 0.0]) == pytest.approx(1.5)

    def test_support_of_ellipsoid(self):
        assert support(ellipsoid(np.diag([4.0, 1.0])), [1.0, 0.0]) == pytest.approx(2.0)

    def test_support_needs_nonzero_direction(self):
        with pytest.raises(DomainError):
            support(ball(2), [0.0, 0.0])

    def test_curvature_needs_unit_normal(self):
        with pytest.raises(DomainError):
            curvature_at_normal(ball(2), [2.0, 0.0])

    def test_ball_curvature(self):
        assert curvature_at_normal(ball(3, 2.0), [0.0, 0.0, 1.0]) == pytest.approx(0.25)

    def test_ellipse_vertex_curvature(self):
        # semi-axes 2 and 1: curvature a / b^2 at (2, 0)
        assert curvature_at_normal(ellipsoid(np.diag([4.0, 1.0])), [1.0, 0.0]) == pytest.approx(2.0)

    @pytest.mark.parametrize("body", [
        ellipsoid(np.diag([4.0, 1.0])),
        ellipsoid(np.array([[2.0, 0.3, 0.0], [0.3, 1.0, 0.1], [0.0, 0.1, 1.5]])),
        support_perturbation(np.eye(2), [(3, 0.04, 0.02)]),
    ])
    def test_curvature_from_support_matches_closed_form(self, body):
        xi = np.ones(body.dimension) / math.sqrt(body.dimension)
        assert curvature_from_support(body, xi) == pytest.approx(curvature_at_normal(body, xi), rel=1e-5)

    def test_boundary_point_of_ball(self):
        point = boundary_point(ball(2, 2.0), [0.0, 1.0])
        assert np.allclose(point, [0.0, 2.0])


class TestVolumeAndMembership:

    def test_unit_ball_volumes(self):
        assert unit_ball_volume(1) == pytest.approx(2.0)
        assert unit_ball_volume(2) == pytest.approx(math.pi)
        assert unit_ball_volume(3) == pytest.approx(4.0 * math.pi / 3.0)

    def test_ellipse_area(self):
        assert volume(ellipsoid(np.diag([4.0, 1.0]))) == pytest.approx(2.0 * math.pi)

    def test_perturbed_area(self):
        a = 0.05
        body = support_perturbation(np.eye(2), [(2, a, 0.0)])
        assert volume(body) == pytest.approx(math.pi * (1.0 - 1.5 * a * a), rel=1e-10)

    def test_scaled_volume(self):
        assert scaled_volume(ball(2), 0.3) == pytest.approx(0.09 * math.pi)

    def test_scaling_keeps_center(self):
        body = scaled(ball(2, 1.0, center=[0.5, 0.5]), 0.5)
        assert body.radius == pytest.approx(0.5)
        assert np.allclose(body.center, [0.5, 0.5])

    def test_contains_is_closed_ball_membership(self):
        body = ball(2)
        assert contains(body, 0.3, [0.2, 0.0])
        assert not contains(body, 0.3, [0.31, 0.0])

    def test_gauge_on_perturbed_boundary(self):
        body = support_perturbation(np.eye(2), [(3, 0.04, 0.02)])
        xi = np.array([math.cos(0.7), math.sin(0.7)])
        point = boundary_point(body, xi)
        assert float(gauge(body, 1.0, point)) == pytest.approx(1.0, abs=1e-8)

    def test_gauge_precise_matches_double(self):
        body = ellipsoid(np.diag([0.04, 0.01]))
        y = [0.1, 0.05]
        assert gauge_precise(body, 1.0, y) == pytest.approx(float(gauge(body, 1.0, np.array(y))), rel=1e-12)

    def test_fits_unit_cube(self):
        assert fits_unit_cube(ball(2), 0.4)
        assert not fits_unit_cube(ball(2), 0.5)


def test_descriptor_keeps_harmonics():
    body = support_perturbation(np.eye(2), [(3, 0.04, 0.02)], center=[0.5, 0.5])
    restored = body_from_dict(body_to_dict(body))
    assert restored.harmonics == body.harmonics
    assert np.allclose(restored.center, body.center)


def test_unknown_descriptor_kind():
    with pytest.raises(DomainError):
        body_from_dict({"kind": "cube", "d": 2})
