import math

import numpy as np
import pytest

from discrepancy.orbit_discrepancy import (
    TranslationOrbitSpec, discrepancy_direct, fourier_discrepancy, kesten_discrepancy, normalization,
    normalized_discrepancy, orbit_count, parse_density, resonant_q_sum, resonant_reduction_profile,
    sample_kesten, sample_translation,
)
from geometry.convex_body import ball, support_perturbation
from utils.errors import DomainError, VariantMismatchError


def periodic_ball_count(center, r, x, alpha, N):
    n = np.arange(N, dtype=float)[:, None]
    disp = np.mod(x + n * alpha, 1.0) - center
    disp -= np.round(disp)
    return int(np.sum(np.linalg.norm(disp, axis=1) <= r))


class TestDirectCount:

    def test_constant_orbit(self, unit_ball_2d):
        spec = TranslationOrbitSpec(unit_ball_2d, r=0.3, alpha=[0.0, 0.0], x=[0.5, 0.5], N=10)
        assert discrepancy_direct(spec) == pytest.approx(10 - 10 * 0.09 * math.pi)

    def test_empty_orbit(self, unit_ball_2d):
        spec = TranslationOrbitSpec(unit_ball_2d, r=0.3, alpha=[0.1, 0.2], x=[0.0, 0.0], N=0)
        assert discrepancy_direct(spec) == 0.0
        assert normalized_discrepancy(spec) == 0.0

    def test_nearest_image_wraps(self):
        spec = TranslationOrbitSpec(ball(2), r=0.3, alpha=[0.0, 0.0], x=[0.98, 0.0], N=1)
        assert orbit_count(spec)[0] == 1

    def test_matches_periodic_scan(self, unit_ball_2d, rng):
        alpha, x = rng.random(2), rng.random(2)
        spec = TranslationOrbitSpec(unit_ball_2d, r=0.27, alpha=alpha, x=x, N=5000)
        count, _ = orbit_count(spec)
        assert count == periodic_ball_count(np.array([0.5, 0.5]), 0.27, x, alpha, 5000)

    def test_shrinking_scale(self, unit_ball_2d):
        spec = TranslationOrbitSpec(unit_ball_2d, r=0.3, alpha=[0.1, 0.2], x=[0.0, 0.0], N=1000, gamma=0.2)
        assert spec.r_eff == pytest.approx(0.3 * 1000 ** -0.2)

    def test_validation(self, unit_ball_2d):
        with pytest.raises(DomainError):
            TranslationOrbitSpec(unit_ball_2d, r=0.6, alpha=[0.1, 0.2], x=[0.0, 0.0], N=10)
        with pytest.raises(DomainError):
            TranslationOrbitSpec(unit_ball_2d, r=0.3, alpha=[0.1, 0.2], x=[0.0, 0.0], N=10, gamma=0.5)
        with pytest.raises(DomainError):
            TranslationOrbitSpec(unit_ball_2d, r=0.3, alpha=[0.1], x=[0.0, 0.0], N=10)


def test_normalization():
    assert normalization(2, 0.3, 10_000) == pytest.approx(math.sqrt(0.3) * 10.0)
    assert normalization(1, 0.3, 10_000) == pytest.approx(1.0)


class TestFourier:

    def test_unknown_mode(self, unit_ball_2d):
        spec = TranslationOrbitSpec(unit_ball_2d, r=0.3, alpha=[0.1, 0.2], x=[0.0, 0.0], N=100)
        with pytest.raises(DomainError):
            fourier_discrepancy(spec, mode="window")

    def test_restricted_q_sum_reproduces_resonant_sum(self, unit_ball_2d, rng):
        spec = TranslationOrbitSpec(unit_ball_2d, r=0.3, alpha=rng.random(2), x=rng.random(2), N=2000)
        resonant = fourier_discrepancy(spec, mode="resonant", eps=0.3)
        regrouped = resonant_q_sum(spec, eps=0.3, restrict_to_resonant=True)
        assert regrouped == pytest.approx(resonant, rel=1e-6, abs=1e-9)

    def test_q_sum_needs_symmetric_body(self, rng):
        body = support_perturbation(np.eye(2), [(3, 0.04, 0.0)], center=[0.5, 0.5])
        spec = TranslationOrbitSpec(body, r=0.3, alpha=rng.random(2), x=rng.random(2), N=100)
        with pytest.raises(VariantMismatchError):
            resonant_q_sum(spec)

    def test_full_window_is_finite(self, unit_ball_2d, rng):
        spec = TranslationOrbitSpec(unit_ball_2d, r=0.3, alpha=rng.random(2), x=rng.random(2), N=200)
        assert math.isfinite(fourier_discrepancy(spec, mode="full_window", eps=0.5))


class TestKesten:

    def test_constant_orbit(self):
        assert kesten_discrepancy(0.5, 0.0, 0.0, 20) == pytest.approx(10.0)

    def test_period_two(self):
        assert kesten_discrepancy(0.5, 0.1, 0.5, 4) == pytest.approx(0.0)

    def test_interval_range(self):
        with pytest.raises(DomainError):
            kesten_discrepancy(1.5, 0.0, 0.1, 10)


class TestSamplers:

    def test_translation_columns_and_reproducibility(self, unit_ball_2d):
        first = sample_translation(unit_ball_2d, 0.2, 0.4, N=200, samples=3, seed=11)
        second = sample_translation(unit_ball_2d, 0.2, 0.4, N=200, samples=3, seed=11)
        assert list(first.columns) == ["sample_id", "r", "alpha1", "alpha2", "x1", "x2",
                                       "raw_discrepancy", "normalized"]
        assert first.equals(second)
        assert first["r"].between(0.2, 0.4).all()

    def test_parametric_family(self, unit_ball_2d):
        frame = sample_translation(unit_ball_2d, 0.1, 0.2, N=100, samples=2, seed=5, parametric=True)
        assert len(frame) == 2

    def test_parametric_family_at_default_scales(self, unit_ball_2d):
        frame = sample_translation(unit_ball_2d, 0.2, 0.4, N=100, samples=20, seed=5, parametric=True)
        assert len(frame) == 20
        alpha = frame[["alpha1", "alpha2"]].to_numpy()
        # 0.4 * sqrt(1 + alpha_i^2) < 0.5
        assert (alpha < 0.75).all()
        assert (frame["alpha_resamples"] >= 0).all()

    def test_parametric_family_needs_room_in_the_cube(self, unit_ball_2d):
        with pytest.raises(DomainError):
            sample_translation(unit_ball_2d, 0.2, 0.5, N=100, samples=2, seed=5, parametric=True)

    def test_beta_density(self, unit_ball_2d):
        frame = sample_translation(unit_ball_2d, 0.2, 0.4, N=100, samples=2, seed=5, density="beta:2,2")
        assert len(frame) == 2

    def test_kesten_sampler(self):
        frame = sample_kesten(math.sqrt(2) - 1, N=1000, samples=4, seed=2)
        assert np.allclose(frame["normalized"], frame["raw_discrepancy"] / math.log(1000))

    def test_resonant_profile_rows(self, unit_ball_2d):
        frame = resonant_reduction_profile(unit_ball_2d, 0.2, 0.4, N=500, eps_list=[0.4, 0.2],
                                           samples=3, seed=9)
        assert len(frame) == 6
        assert np.allclose(frame["residual"], frame["direct"] - frame["resonant"])


def test_parse_density():
    assert parse_density(None) is None
    assert parse_density("uniform") is None
    assert parse_density("beta:2,3") == (2.0, 3.0)
    with pytest.raises(DomainError):
        parse_density("gamma:1,1")
