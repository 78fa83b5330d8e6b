"""
Empirical Distributions
ECDF construction and evaluation, two-sample Kolmogorov-Smirnov distance,
quantiles and the Cauchy fit used by the Kesten experiment
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Sequence, Any
import sys

import numpy as np
from scipy import stats

sys.path.append(str(Path(__file__).parent.parent))

from utils.errors import DomainError, InsufficientSamplesError

REPORT_QUANTILES = (1, 5, 25, 50, 75, 95, 99)
MIN_CAUCHY_SAMPLES = 100


@dataclass(frozen=True, eq=False)
class EmpiricalCDF:
    """Sorted samples; F(x) = #{samples <= x} / n"""
    samples: np.ndarray

    def __post_init__(self):
        s = np.sort(np.asarray(self.samples, dtype=float).reshape(-1))
        if s.size == 0:
            raise DomainError("an empirical CDF needs at least one sample")
        if not np.all(np.isfinite(s)):
            raise DomainError("samples must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @classmethod
    def from_samples(cls, values: Sequence[float]) -> "EmpiricalCDF":
        return cls(np.asarray(values, dtype=float))

    @property
    def n(self) -> int:
        return int(self.samples.size)

    def __call__(self, x):
        return np.searchsorted(self.samples, np.asarray(x, dtype=float), side="right") / self.n

    def negated(self) -> "EmpiricalCDF":
        return EmpiricalCDF(-self.samples)


def ks_distance(a: EmpiricalCDF, b: EmpiricalCDF) -> float:
    """sup |F_a - F_b| (two-sample KS statistic)"""
    return float(stats.ks_2samp(a.samples, b.samples, method="asymp").statistic)


def symmetry_distance(a: EmpiricalCDF) -> float:
    """KS distance between the law of X and the law of -X"""
    return ks_distance(a, a.negated())


def quantile(a: EmpiricalCDF, q: float) -> float:
    """Linear interpolation between order statistics: position q (n - 1)"""
    if not 0.0 <= q <= 1.0:
        raise DomainError(f"quantile level must lie in [0, 1], got {q}")
    return float(np.quantile(a.samples, q))


def standard_cauchy_cdf(z):
    """atan(z)/pi + 1/2"""
    return np.arctan(np.asarray(z, dtype=float)) / np.pi + 0.5


def ks_to_distribution(a: EmpiricalCDF, cdf) -> float:
    """One-sample KS distance sup |F_a - cdf|"""
    return float(stats.kstest(a.samples, cdf, method="asymp").statistic)


@dataclass(frozen=True)
class CauchyFit:
    location: float
    scale: float
    ks_to_fit: float
    degenerate: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {"location": self.location, "scale": self.scale,
                "ks_to_fit": self.ks_to_fit, "degenerate": self.degenerate}


def cauchy_fit(a: EmpiricalCDF) -> CauchyFit:
    """
    Quantile fit of a Cauchy law: location = median, scale = IQR / 2

    A sample with zero interquartile range is flagged degenerate and gets a NaN KS distance.
    """
    if a.n < MIN_CAUCHY_SAMPLES:
        raise InsufficientSamplesError(f"Cauchy fit needs at least {MIN_CAUCHY_SAMPLES} samples, got {a.n}")
    location = quantile(a, 0.5)
    scale = (quantile(a, 0.75) - quantile(a, 0.25)) / 2.0
    if scale <= 0:
        return CauchyFit(location=location, scale=0.0, ks_to_fit=float("nan"), degenerate=True)
    dist = stats.cauchy(loc=location, scale=scale)
    return CauchyFit(location=location, scale=scale, ks_to_fit=ks_to_distribution(a, dist.cdf))


def comparison_report(a: EmpiricalCDF, b: EmpiricalCDF) -> Dict[str, Any]:
    """{n_a, n_b, ks, quantiles: {level: {a, b}}}"""
    return {
        "n_a": a.n,
        "n_b": b.n,
        "ks": ks_distance(a, b),
        "quantiles": {str(q): {"a": quantile(a, q / 100.0), "b": quantile(b, q / 100.0)}
                      for q in REPORT_QUANTILES},
    }
