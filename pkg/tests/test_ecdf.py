import numpy as np
import pytest

from quality.ecdf import (
    EmpiricalCDF, cauchy_fit, comparison_report, ks_distance, ks_to_distribution, quantile,
    standard_cauchy_cdf, symmetry_distance,
)
from utils.errors import DomainError, InsufficientSamplesError


class TestEmpiricalCDF:

    def test_rejects_empty_and_nonfinite(self):
        with pytest.raises(DomainError):
            EmpiricalCDF.from_samples([])
        with pytest.raises(DomainError):
            EmpiricalCDF.from_samples([0.1, float("nan")])

    def test_step_values(self):
        F = EmpiricalCDF.from_samples([3.0, 1.0, 2.0])
        assert F(2.0) == pytest.approx(2.0 / 3.0)
        assert F(0.5) == 0.0
        assert F(3.0) == 1.0
        assert np.allclose(F([1.0, 2.5]), [1.0 / 3.0, 2.0 / 3.0])

    def test_negated(self):
        F = EmpiricalCDF.from_samples([1.0, 2.0, 3.0]).negated()
        assert list(F.samples) == [-3.0, -2.0, -1.0]


class TestDistances:

    def test_ks_distance(self):
        a = EmpiricalCDF.from_samples([0.0, 1.0])
        b = EmpiricalCDF.from_samples([0.5])
        assert ks_distance(a, b) == pytest.approx(0.5)
        assert ks_distance(a, a) == 0.0

    def test_disjoint_samples(self):
        a = EmpiricalCDF.from_samples([0.0, 0.1, 0.2])
        b = EmpiricalCDF.from_samples([5.0, 6.0])
        assert ks_distance(a, b) == pytest.approx(1.0)

    def test_symmetry_distance(self):
        assert symmetry_distance(EmpiricalCDF.from_samples([-2.0, -1.0, 1.0, 2.0])) == 0.0
        assert symmetry_distance(EmpiricalCDF.from_samples([1.0, 2.0, 3.0])) == pytest.approx(1.0)

    def test_agrees_with_step_functions(self, rng):
        a = EmpiricalCDF.from_samples(rng.normal(size=300))
        b = EmpiricalCDF.from_samples(rng.normal(0.2, 1.0, size=200))
        grid = np.concatenate([a.samples, b.samples])
        assert ks_distance(a, b) == pytest.approx(np.max(np.abs(a(grid) - b(grid))))

    def test_quantile(self):
        F = EmpiricalCDF.from_samples([1.0, 2.0, 3.0])
        assert quantile(F, 0.5) == pytest.approx(2.0)
        assert quantile(F, 0.0) == pytest.approx(1.0)
        assert quantile(F, 0.25) == pytest.approx(1.5)
        with pytest.raises(DomainError):
            quantile(F, 1.5)

    def test_one_sample_distance(self):
        F = EmpiricalCDF.from_samples([0.0])
        assert ks_to_distribution(F, standard_cauchy_cdf) == pytest.approx(0.5)


class TestCauchyFit:

    def test_standard_cauchy(self):
        draws = np.random.default_rng(17).standard_cauchy(5000)
        fit = cauchy_fit(EmpiricalCDF.from_samples(draws))
        assert abs(fit.location) < 0.1
        assert fit.scale == pytest.approx(1.0, abs=0.1)
        assert fit.ks_to_fit < 0.03
        assert not fit.degenerate

    def test_degenerate_sample(self):
        fit = cauchy_fit(EmpiricalCDF.from_samples(np.zeros(200)))
        assert fit.degenerate
        assert np.isnan(fit.ks_to_fit)

    def test_needs_enough_samples(self):
        with pytest.raises(InsufficientSamplesError):
            cauchy_fit(EmpiricalCDF.from_samples(np.arange(50.0)))


def test_comparison_report():
    a = EmpiricalCDF.from_samples(np.linspace(0.0, 1.0, 11))
    b = EmpiricalCDF.from_samples(np.linspace(0.0, 2.0, 21))
    report = comparison_report(a, b)
    assert set(report) == {"n_a", "n_b", "ks", "quantiles"}
    assert (report["n_a"], report["n_b"]) == (11, 21)
    assert set(report["quantiles"]) == {"1", "5", "25", "50", "75", "95", "99"}
    assert report["quantiles"]["50"]["a"] == pytest.approx(0.5)
    assert report["quantiles"]["50"]["b"] == pytest.approx(1.0)
