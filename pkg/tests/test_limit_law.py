import math
from dataclasses import replace

import numpy as np
import pytest

from geometry.convex_body import ball, support_perturbation
from lattices.lattice_space import primitive_array
from limit_law.limit_law import (
    LimitLawConfig, build_sample_point, disk_frequencies, eval_flow_d2, eval_flow_dge4, eval_geodesic,
    eval_translation_nonsym, eval_translation_sym, evaluate, negated_phases, phases_for, sample_limit,
    sample_limit_ecdf, sin_ratio, tail_variance, truncation_bound,
)
from quality.ecdf import symmetry_distance
from utils.errors import DomainError, UnsupportedDimensionError, VariantMismatchError
from utils.rng import spawn_seeds

N_HAAR = 10_000


def seed_of(seed, index=0):
    return spawn_seeds(seed, index + 1)[index]


@pytest.fixture
def sym_config(unit_ball_2d):
    return LimitLawConfig(variant="translation_sym", d=2, body=unit_ball_2d, M=3, P_max=8,
                          samples=4, seed=3, n_haar=N_HAAR)


class TestConfig:

    def test_negative_cutoff(self, unit_ball_2d):
        with pytest.raises(DomainError):
            LimitLawConfig(variant="translation_sym", d=2, body=unit_ball_2d, M=-1)

    def test_flow_series_needs_four_dimensions(self):
        with pytest.raises(UnsupportedDimensionError):
            LimitLawConfig(variant="flow_dge4_sym", d=3, body=ball(3))

    def test_symmetric_variant_rejects_general_body(self):
        body = support_perturbation(np.eye(2), [(3, 0.05, 0.0)], center=[0.5, 0.5])
        with pytest.raises(VariantMismatchError):
            LimitLawConfig(variant="translation_sym", d=2, body=body)

    def test_unknown_variant(self, unit_ball_2d):
        with pytest.raises(DomainError):
            LimitLawConfig(variant="translation", d=2, body=unit_ball_2d)

    def test_lattice_dimensions(self, unit_ball_2d):
        assert LimitLawConfig(variant="translation_sym", d=2, body=unit_ball_2d).lattice_dim == 3
        assert LimitLawConfig(variant="geodesic", d=4).lattice_dim == 4
        assert LimitLawConfig(variant="flow_d2", d=2, body=unit_ball_2d).lattice_dim == 0

    def test_phase_shift(self, unit_ball_2d):
        assert LimitLawConfig(variant="translation_sym", d=3, body=ball(3)).shift == pytest.approx(0.25)
        assert LimitLawConfig(variant="geodesic", d=4).shift == 0.0


def test_sin_ratio():
    assert sin_ratio(2, 1.5) == 0.0
    assert sin_ratio(1, 0.0) == pytest.approx(math.pi)
    assert sin_ratio(1, 0.25) == pytest.approx(math.sin(math.pi / 4) / 0.25)
    assert sin_ratio(3, 0.1, rho=0.5) == pytest.approx(math.sin(0.15 * math.pi) / 0.1)


class TestSamplePoints:

    def test_reproducible(self, sym_config):
        first = build_sample_point(sym_config, seed_of(7))
        second = build_sample_point(sym_config, seed_of(7))
        assert np.array_equal(first.basis, second.basis)
        assert np.array_equal(first.theta, second.theta)
        assert np.array_equal(first.b, second.b)
        assert first.b_prime is None

    def test_unimodular_reduced_basis(self, sym_config):
        pt = build_sample_point(sym_config, seed_of(1))
        assert pt.dim == 3
        assert abs(np.linalg.det(pt.basis)) == pytest.approx(1.0)

    def test_phases_extend_with_the_cutoff(self, sym_config):
        small = build_sample_point(sym_config, seed_of(5))
        large = build_sample_point(replace(sym_config, M=5), seed_of(5))
        count = len(primitive_array(3, 5))
        b, _ = phases_for(small, count)
        assert np.array_equal(b, large.b)
        assert np.array_equal(b[:small.b.size], small.b)

    def test_nonsymmetric_points_carry_second_phases(self, unit_ball_2d):
        cfg = LimitLawConfig(variant="translation_nonsym", d=2, body=unit_ball_2d, M=2, n_haar=N_HAAR)
        pt = build_sample_point(cfg, seed_of(2))
        assert pt.b_prime is not None
        assert pt.b_prime.shape == pt.b.shape


class TestSeries:

    def test_no_modes_gives_zero(self, sym_config):
        cfg = replace(sym_config, M=0)
        pt = build_sample_point(cfg, seed_of(0))
        assert evaluate(pt, cfg) == (0.0, 0)

    def test_diagonal_phases_reduce_to_symmetric_series(self, sym_config):
        cfg_nonsym = replace(sym_config, variant="translation_nonsym")
        for i in range(3):
            pt = build_sample_point(cfg_nonsym, seed_of(11, i))
            diagonal = replace(pt, b_prime=pt.b)
            assert eval_translation_nonsym(diagonal, cfg_nonsym) == pytest.approx(
                eval_translation_sym(diagonal, sym_config), abs=1e-12)

    def test_negated_phases_flip_single_multiplicity_terms(self, sym_config):
        cfg = replace(sym_config, P_max=1)
        pt = build_sample_point(cfg, seed_of(4))
        value = eval_translation_sym(pt, cfg)
        assert eval_translation_sym(negated_phases(pt, cfg.d), cfg) == pytest.approx(-value, abs=1e-12)

    def test_evaluator_checks_variant(self, sym_config):
        pt = build_sample_point(sym_config, seed_of(0))
        with pytest.raises(VariantMismatchError):
            eval_geodesic(pt, sym_config)

    def test_flow_point_has_no_lattice(self, unit_ball_2d, sym_config):
        cfg = LimitLawConfig(variant="flow_d2", d=2, body=unit_ball_2d, r=0.2, K_max=4)
        pt = build_sample_point(cfg, seed_of(0))
        with pytest.raises(VariantMismatchError):
            eval_translation_sym(pt, sym_config)

    def test_high_dimensional_flow_series(self):
        cfg = LimitLawConfig(variant="flow_dge4_sym", d=4, body=ball(4, 1.0, center=[0.5] * 4), M=1,
                             P_max=4, n_haar=N_HAAR, v=(1.0, 0.7, 0.3, 1.0))
        pt = build_sample_point(cfg, seed_of(6))
        assert math.isfinite(eval_flow_dge4(pt, cfg))

    def test_geodesic_series(self):
        cfg = LimitLawConfig(variant="geodesic", d=4, M=1, P_max=4, n_haar=N_HAAR)
        pt = build_sample_point(cfg, seed_of(6))
        assert math.isfinite(eval_geodesic(pt, cfg))


class TestPlanarFlowLaw:

    def test_zero_window_vanishes(self):
        coeffs = np.ones(len(disk_frequencies(6)), dtype=complex)
        assert eval_flow_d2([0.3, 0.1], [0.0, 0.0], [1.0, math.sqrt(2.0)], coeffs, K_max=6) == 0.0

    def test_small_divisors_are_counted(self):
        coeffs = np.ones(len(disk_frequencies(3)), dtype=complex)
        _, skipped = eval_flow_d2([0.0, 0.0], [0.2, 0.3], [1.0, 0.0], coeffs, K_max=3, return_flags=True)
        # every k = (0, j) has (k, v) = 0
        assert skipped == 6

    def test_coefficient_count_is_checked(self):
        with pytest.raises(DomainError):
            eval_flow_d2([0.0, 0.0], [0.2, 0.3], [1.0, 0.5], np.ones(3), K_max=3)

    def test_sampler(self, unit_ball_2d):
        cfg = LimitLawConfig(variant="flow_d2", d=2, body=unit_ball_2d, r=0.2, K_max=8, samples=3)
        frame = sample_limit(cfg)
        assert list(frame.columns) == ["sample_id", "value", "skipped_terms", "short_flags", "resampled"]
        assert len(frame) == 3


class TestTailDiagnostics:

    def test_tail_variance_table(self, sym_config):
        pt = build_sample_point(sym_config, seed_of(8))
        table, total = tail_variance(pt, sym_config)
        assert list(table.columns) == ["m1", "m2", "m3", "R", "Z", "gamma", "gamma_tail", "variance"]
        assert len(table) == len(primitive_array(3, sym_config.M))
        assert (table["variance"] >= 0).all()
        assert total == pytest.approx(table["variance"].sum())

    def test_truncation_bound_is_positive(self, sym_config):
        pt = build_sample_point(sym_config, seed_of(8))
        assert truncation_bound(pt, sym_config) > 0

    def test_flow_variants_have_no_tail_variance(self):
        cfg = LimitLawConfig(variant="geodesic", d=4, M=1, P_max=4, n_haar=N_HAAR)
        pt = build_sample_point(cfg, seed_of(1))
        with pytest.raises(VariantMismatchError):
            tail_variance(pt, cfg)


class TestSampler:

    def test_columns_and_reproducibility(self, sym_config):
        first = sample_limit(sym_config)
        second = sample_limit(sym_config)
        assert list(first.columns) == ["sample_id", "value", "skipped_terms", "short_flags", "resampled"]
        assert first.equals(second)

    @pytest.mark.slow
    def test_worker_count_does_not_change_samples(self, sym_config):
        cfg = replace(sym_config, samples=12)
        assert sample_limit(cfg, max_workers=1).equals(sample_limit(cfg, max_workers=2))

    @pytest.mark.slow
    def test_symmetric_body_law_is_symmetric(self, sym_config):
        cfg = replace(sym_config, samples=400)
        assert symmetry_distance(sample_limit_ecdf(cfg)) < 0.12


class TestConfigDefaults:

    def test_cutoffs_come_from_config(self, unit_ball_2d, lab_config):
        lab_config.set("limit_law.M", 5)
        lab_config.set("limit_law.P_max", 12)
        cfg = LimitLawConfig(variant="translation_sym", d=2, body=unit_ball_2d)
        assert (cfg.M, cfg.P_max) == (5, 12)

    def test_explicit_cutoffs_win(self, unit_ball_2d, lab_config):
        lab_config.set("limit_law.M", 5)
        cfg = LimitLawConfig(variant="translation_sym", d=2, body=unit_ball_2d, M=2)
        assert cfg.M == 2


class TestParametricFamily:

    def test_alpha_is_conditioned_on_the_scale(self):
        cfg = LimitLawConfig(variant="translation_sym", d=2, M=1, P_max=2, n_haar=N_HAAR,
                             parametric=True, parametric_scale=0.4)
        for i in range(5):
            pt = build_sample_point(cfg, seed_of(9, i))
            assert np.all(0.4 * np.sqrt(np.diag(pt.body.sigma)) < 0.5)

    def test_scale_must_leave_room(self):
        with pytest.raises(DomainError):
            LimitLawConfig(variant="translation_sym", d=2, parametric=True, parametric_scale=0.5)
