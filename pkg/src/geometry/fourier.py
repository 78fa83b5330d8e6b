"""
Fourier Coefficients of Convex-Body Indicators
Herz asymptotics, exact ball coefficients and the asymptotic error profile
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Tuple, Optional
import sys

import numpy as np
import pandas as pd
from scipy import integrate, special

sys.path.append(str(Path(__file__).parent.parent))

from geometry.convex_body import ConvexBody, unit_ball_volume
from utils.errors import DomainError, UnsupportedDimensionError
from utils.logger import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class FourierCoefficientAsym:
    """
    Herz approximation d_k(r, x) of the k-th Fourier term of chi_{rC} - Vol,
    in units of r^{(d-1)/2}

    Symmetric bodies:  magnitude * sin(2 pi phase_plus) * cos(2 pi (k, x))
    General bodies:    magnitude * sin(2 pi (phase_plus + (k, x)))
                       + magnitude_minus * sin(2 pi (phase_minus - (k, x)))
    """
    k: Tuple[int, ...]
    r: float
    magnitude: float
    magnitude_minus: float
    phase_plus: float
    phase_minus: float
    symmetric: bool

    def value(self, x: Optional[Sequence[float]] = None) -> float:
        kx = 0.0 if x is None else float(np.dot(self.k, np.asarray(x, dtype=float)))
        if self.symmetric:
            return self.magnitude * np.sin(2 * np.pi * self.phase_plus) * np.cos(2 * np.pi * kx)
        return (self.magnitude * np.sin(2 * np.pi * (self.phase_plus + kx))
                + self.magnitude_minus * np.sin(2 * np.pi * (self.phase_minus - kx)))


def herz_terms(body: ConvexBody, k: np.ndarray, r: float):
    """
    Vectorized Herz data for integer frequencies k of shape (n, d)

    Returns:
        (w_plus, w_minus, phase_plus, phase_minus, norm) where w = K^{-1/2}(+-k/|k|),
        phases are r P0(+-k) - (d-1)/8 and norm = |k|
    """
    k = np.atleast_2d(np.asarray(k, dtype=float))
    norm = np.linalg.norm(k, axis=1)
    if np.any(norm == 0):
        raise DomainError("Herz asymptotics need k != 0")
    d = body.dimension
    unit = k / norm[:, None]
    w_plus = body.centered_curvature(unit) ** -0.5
    shift = (d - 1) / 8.0
    phase_plus = r * body.centered_support(k) - shift
    if body.symmetric:
        return w_plus, w_plus, phase_plus, phase_plus, norm
    w_minus = body.centered_curvature(-unit) ** -0.5
    phase_minus = r * body.centered_support(-k) - shift
    return w_plus, w_minus, phase_plus, phase_minus, norm


def fourier_coeff_asymptotic(body: ConvexBody, k: Sequence[int], r: float) -> FourierCoefficientAsym:
    """d_k(r) for one frequency"""
    k = np.asarray(k).reshape(-1)
    if k.shape != (body.dimension,):
        raise DomainError(f"expected a {body.dimension}-vector frequency")
    if not np.any(k):
        raise DomainError("Herz asymptotics need k != 0")
    if r <= 0:
        raise DomainError(f"scale must be positive, got {r}")

    w_plus, w_minus, ph_plus, ph_minus, norm = herz_terms(body, k[None, :], r)
    decay = norm[0] ** (-(body.dimension + 1) / 2.0)
    prefactor = 1.0 / np.pi if body.symmetric else 1.0 / (2 * np.pi)
    return FourierCoefficientAsym(
        k=tuple(int(v) for v in k),
        r=float(r),
        magnitude=float(prefactor * w_plus[0] * decay),
        magnitude_minus=float(prefactor * w_minus[0] * decay),
        phase_plus=float(ph_plus[0]),
        phase_minus=float(ph_minus[0]),
        symmetric=body.symmetric,
    )


def fourier_coeff_herz_complex(body: ConvexBody, r: float, k: np.ndarray) -> np.ndarray:
    """
    Complex Herz approximation of the Fourier coefficients of chi_{rC0 + center}

    c_k ~ r^{(d-1)/2} [w+ e^{2 pi i phi+} - w- e^{-2 pi i phi-}] e^{-2 pi i (k, c)} / (2 pi i |k|^{(d+1)/2})
    """
    k = np.atleast_2d(np.asarray(k, dtype=float))
    d = body.dimension
    w_plus, w_minus, ph_plus, ph_minus, norm = herz_terms(body, k, r)
    bracket = w_plus * np.exp(2j * np.pi * ph_plus) - w_minus * np.exp(-2j * np.pi * ph_minus)
    shift = np.exp(-2j * np.pi * (k @ body.center))
    return r ** ((d - 1) / 2.0) * bracket * shift / (2j * np.pi * norm ** ((d + 1) / 2.0))


def fourier_coeff_exact_ball(d: int, r: float, k: Sequence[float]) -> float:
    """
    Exact Fourier coefficient of the indicator of the radius-r ball centered at 0

    d=1: sin(2 pi r|k|)/(pi|k|). d>=2: 2 pi |k|^{1-d/2} int_0^r s^{d/2} J_{d/2-1}(2 pi |k| s) ds
    by adaptive quadrature.
    """
    if d not in (1, 2, 3):
        raise UnsupportedDimensionError(f"exact ball coefficients implemented for d in {{1,2,3}}, got {d}")
    if r <= 0:
        raise DomainError(f"radius must be positive, got {r}")
    k = np.atleast_1d(np.asarray(k, dtype=float))
    if k.size != d:
        raise DomainError(f"expected a {d}-vector frequency")
    kn = float(np.linalg.norm(k))
    if kn == 0:
        return unit_ball_volume(d) * r ** d
    if d == 1:
        return float(np.sin(2 * np.pi * r * kn) / (np.pi * kn))

    nu = d / 2.0 - 1.0
    integrand = lambda s: s ** (d / 2.0) * special.jv(nu, 2 * np.pi * kn * s)
    value, _ = integrate.quad(integrand, 0.0, r, epsabs=1e-14, epsrel=1e-10, limit=500)
    return float(2 * np.pi * kn ** (1.0 - d / 2.0) * value)


def exact_ball_coefficients(d: int, r: float, k: np.ndarray, center: Optional[np.ndarray] = None) -> np.ndarray:
    """Vectorized exact coefficients for d=2 (closed Bessel form), with center phase"""
    if d != 2:
        return np.array([fourier_coeff_exact_ball(d, r, kk) for kk in np.atleast_2d(k)], dtype=complex)
    k = np.atleast_2d(np.asarray(k, dtype=float))
    kn = np.linalg.norm(k, axis=1)
    out = np.where(kn > 0, r * special.j1(2 * np.pi * r * kn) / np.where(kn > 0, kn, 1.0), np.pi * r * r)
    if center is not None:
        return out * np.exp(-2j * np.pi * (k @ np.asarray(center, dtype=float)))
    return out.astype(complex)


def herz_error_profile(r: float = 0.25, k_min: int = 4, k_max: int = 256, bins: int = 12):
    """
    Relative error of the d=2 ball Herz coefficient against the exact one

    The error |r^{-1/2} c_k - d_k| is measured in units of the envelope
    |k|^{-3/2}/pi, maximized over geometric bins of |k| = n along k=(n,0).

    Returns:
        (DataFrame with columns k_lo, k_hi, k_mid, max_error; fitted log-log slope)
    """
    n = np.arange(k_min, k_max + 1, dtype=float)
    exact = r * special.j1(2 * np.pi * r * n) / n
    asym = np.sqrt(r) / np.pi * n ** -1.5 * np.sin(2 * np.pi * (r * n - 1.0 / 8.0))
    envelope = np.sqrt(r) / np.pi * n ** -1.5
    rel = np.abs(exact - asym) / envelope

    edges = np.geomspace(k_min, k_max + 1, bins + 1)
    rows = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mask = (n >= lo) & (n < hi)
        if not np.any(mask):
            continue
        rows.append({"k_lo": lo, "k_hi": hi, "k_mid": float(np.sqrt(lo * hi)),
                     "max_error": float(np.max(rel[mask]))})
    table = pd.DataFrame(rows)
    slope = float(np.polyfit(np.log(table["k_mid"]), np.log(table["max_error"]), 1)[0])
    logger.info(f"Herz error profile: slope {slope:.3f} over |k| in [{k_min}, {k_max}]")
    return table, slope
