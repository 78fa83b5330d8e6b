"""
Translation Discrepancy
Exact and Fourier-approximate discrepancies of toral translations relative to
convex bodies, the resonant q-sum, the Kesten interval case and ECDF samplers
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Any
import math
import sys

import mpmath as mp
import numpy as np
import pandas as pd

sys.path.append(str(Path(__file__).parent.parent))

from geometry.convex_body import (
    ConvexBody, body_from_dict, body_to_dict, draw_section_alpha, fits_unit_cube, gauge, gauge_precise,
    scaled_volume, section_alpha_bound, slanted_cylinder_section, translated,
)
from geometry.fourier import herz_terms
from lattices.lattice_space import (
    canonical_last, dani_lattice, lattice_point_of, reduced_basis, resonant_set,
)
from limit_law.limit_law import sin_ratio
from quality.ecdf import EmpiricalCDF
from utils.config_loader import get_config
from utils.errors import DomainError, VariantMismatchError
from utils.logger import get_logger
from utils.parallel import parallel_map
from utils.rng import spawn_seeds, stream

logger = get_logger(__name__)

MODES = ("full_window", "resonant")


@dataclass(frozen=True, eq=False)
class TranslationOrbitSpec:
    """
    Orbit x, x+alpha, ..., x+(N-1)alpha of the toral translation and the body
    r N^{-gamma} C0 + center
    """
    body: ConvexBody
    r: float
    alpha: np.ndarray
    x: np.ndarray
    N: int
    gamma: float = 0.0

    def __post_init__(self):
        d = self.body.dimension
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        if alpha.shape != (d,) or x.shape != (d,):
            raise DomainError(f"alpha and x must be {d}-vectors")
        if not (np.all(np.isfinite(alpha)) and np.all(np.isfinite(x))):
            raise DomainError("alpha and x must be finite")
        if self.N < 0:
            raise DomainError(f"N must be >= 0, got {self.N}")
        if self.r <= 0:
            raise DomainError(f"scale must be positive, got {self.r}")
        if not 0.0 <= self.gamma < 1.0 / d:
            raise DomainError(f"gamma must lie in [0, 1/d), got {self.gamma}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "N", int(self.N))
        if not fits_unit_cube(self.body, self.r_eff):
            raise DomainError(f"body scaled by {self.r_eff:.6g} does not fit in the unit cube")

    @property
    def d(self) -> int:
        return self.body.dimension

    @property
    def r_eff(self) -> float:
        """r N^{-gamma}"""
        if self.gamma == 0.0 or self.N <= 1:
            return float(self.r)
        return float(self.r) * self.N ** (-self.gamma)


def normalization(d: int, r: float, N: int, gamma: float = 0.0) -> float:
    """r^{(d-1)/2} N^{(d-1)(1 - gamma d)/(2d)}"""
    return r ** ((d - 1) / 2.0) * float(N) ** ((d - 1) * (1.0 - gamma * d) / (2.0 * d))


# ======================================================================
# DIRECT COUNTING
# ======================================================================

def _nearest_image(points: np.ndarray, center: np.ndarray) -> np.ndarray:
    return np.mod(points - center + 0.5, 1.0) - 0.5


def _precise_inside(body: ConvexBody, r: float, x: np.ndarray, alpha: np.ndarray, n: int, digits: int) -> bool:
    """Membership of x + n alpha recomputed with mpmath"""
    with mp.workdps(digits):
        disp = []
        for xi, ai, ci in zip(x, alpha, body.center):
            y = mp.mpf(float(xi)) + n * mp.mpf(float(ai))
            y = y - mp.floor(y)
            z = y - mp.mpf(float(ci)) + mp.mpf("0.5")
            disp.append(z - mp.floor(z) - mp.mpf("0.5"))
        return gauge_precise(body, r, disp, digits=digits) <= 1.0


def orbit_count(spec: TranslationOrbitSpec) -> Tuple[int, int]:
    """
    Number of n < N with x + n alpha (mod 1) in the body

    Returns:
        (count, number of points re-tested in extended precision)
    """
    config = get_config()
    chunk = int(config.get('discrepancy.chunk_size', 65536))
    digits = int(config.get('discrepancy.mp_digits', 50))
    base_band = float(config.get('discrepancy.boundary_band', 1e-12))

    r_eff = spec.r_eff
    # Rounding in x + n alpha grows linearly with n
    band = max(base_band, 8 * spec.N * np.finfo(float).eps * (1 + np.max(np.abs(spec.alpha))) / r_eff)

    count, rechecked = 0, 0
    for start in range(0, spec.N, chunk):
        n = np.arange(start, min(start + chunk, spec.N), dtype=float)
        points = np.mod(spec.x + n[:, None] * spec.alpha, 1.0)
        g = gauge(spec.body, r_eff, _nearest_image(points, spec.body.center))
        borderline = np.abs(g - 1.0) < band
        count += int(np.sum((g <= 1.0) & ~borderline))
        for i in np.nonzero(borderline)[0]:
            rechecked += 1
            count += int(_precise_inside(spec.body, r_eff, spec.x, spec.alpha, int(n[i]), digits))
    return count, rechecked


def discrepancy_direct(spec: TranslationOrbitSpec) -> float:
    """sum_{n<N} chi(x + n alpha) - N Vol(r_eff C)"""
    if spec.N == 0:
        return 0.0
    count, rechecked = orbit_count(spec)
    if rechecked:
        logger.debug(f"{rechecked} boundary points re-tested in extended precision")
    return count - spec.N * scaled_volume(spec.body, spec.r_eff)


def normalized_discrepancy(spec: TranslationOrbitSpec) -> float:
    if spec.N == 0:
        return 0.0
    return discrepancy_direct(spec) / normalization(spec.d, spec.r, spec.N, spec.gamma)


# ======================================================================
# FOURIER APPROXIMATIONS
# ======================================================================

def frequencies_in_ball(d: int, radius2: float, block: int = 1 << 20) -> Iterator[np.ndarray]:
    """Blocks of all integer k != 0 with |k|^2 < radius2"""
    bound = int(math.floor(math.sqrt(radius2)))
    if d == 1:
        k = np.arange(-bound, bound + 1, dtype=np.int64)
        k = k[(k != 0) & (k * k < radius2)]
        yield k[:, None]
        return

    axis = np.arange(-bound, bound + 1, dtype=np.int64)
    heads = np.stack(np.meshgrid(*([axis] * (d - 1)), indexing="ij"), axis=-1).reshape(-1, d - 1)
    rem = radius2 - np.sum(heads * heads, axis=1)
    heads, rem = heads[rem > 0], rem[rem > 0]
    tmax = np.floor(np.sqrt(rem)).astype(np.int64)
    tmax -= (tmax * tmax >= rem).astype(np.int64)
    keep = tmax >= 0
    heads, tmax = heads[keep], tmax[keep]
    counts = 2 * tmax + 1

    start = 0
    while start < heads.shape[0]:
        stop = start + max(1, int(np.searchsorted(np.cumsum(counts[start:]), block)))
        h, t, c = heads[start:stop], tmax[start:stop], counts[start:stop]
        rows = np.repeat(h, c, axis=0)
        offsets = np.arange(int(c.sum())) - np.repeat(np.cumsum(c) - c, c)
        last = offsets - np.repeat(t, c)
        k = np.column_stack([rows, last])
        yield k[np.any(k != 0, axis=1)]
        start = stop


def orbit_fourier_terms(
    body: ConvexBody,
    r_eff: float,
    k: np.ndarray,
    beta: np.ndarray,
    shift: np.ndarray,
    N: int,
    resonant: bool,
) -> np.ndarray:
    """
    Orbit sums of the Herz terms of frequencies k, normalized by N^{(d-1)/(2d)}

    beta is the signed fractional part {k, alpha}; resonant mode replaces
    sin(pi beta) by pi beta.
    """
    d = body.dimension
    w_plus, w_minus, ph_plus, ph_minus, norm = herz_terms(body, k, r_eff)
    kx = k @ shift
    zero = beta == 0.0
    safe = np.where(zero, 1.0, beta)
    denominator = np.pi * safe if resonant else np.sin(np.pi * safe)
    S = np.where(zero, float(N), np.sin(np.pi * N * safe) / denominator)
    drift = np.pi * (N - 1) * beta
    decay = norm ** (-(d + 1) / 2.0)

    if body.symmetric:
        terms = (w_plus / np.pi) * np.sin(2 * np.pi * ph_plus) * np.cos(2 * np.pi * kx + drift)
    else:
        terms = (w_plus * np.sin(2 * np.pi * (ph_plus + kx) + drift)
                 + w_minus * np.sin(2 * np.pi * (ph_minus - kx) - drift)) / (2 * np.pi)
    return terms * decay * S / float(N) ** ((d - 1) / (2.0 * d))


def fourier_discrepancy(spec: TranslationOrbitSpec, mode: str = "resonant", eps: float = 0.1) -> float:
    """
    Normalized Fourier approximation of the discrepancy

    full_window sums every frequency with 0 < |k|^2 < N^{2/d}/eps; resonant sums
    the resonant set only, with sin(pi {k,alpha}) replaced by pi {k,alpha}.
    """
    if mode not in MODES:
        raise DomainError(f"unknown mode: {mode}")
    if not 0.0 < eps < 1.0:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    if spec.N == 0:
        return 0.0

    shift = spec.x - spec.body.center
    d = spec.d
    if mode == "resonant":
        harmonics = resonant_set(spec.N, spec.alpha, eps)
        if not harmonics:
            return 0.0
        k = np.array([h.k for h in harmonics], dtype=float)
        beta = np.array([h.frac for h in harmonics])
        return float(np.sum(orbit_fourier_terms(spec.body, spec.r_eff, k, beta, shift, spec.N, True)))

    total = 0.0
    for k in frequencies_in_ball(d, float(spec.N) ** (2.0 / d) / eps):
        _, beta = canonical_last(k, spec.alpha)
        total += float(np.sum(orbit_fourier_terms(spec.body, spec.r_eff, k.astype(float), beta,
                                                  shift, spec.N, False)))
    return total


def q_term(body: ConvexBody, r_eff: float, N: int, X: np.ndarray, Z: float,
           p: int, m_gamma: float, singular_z: float = 1e-12) -> float:
    """One q(r, alpha, x, N, m, p) term of the regrouped resonant sum"""
    d = body.dimension
    R = float(np.linalg.norm(X))
    w = float(body.centered_curvature(X / R)) ** -0.5
    phase = r_eff * N ** (1.0 / d) * p * float(body.centered_support(X)) - (d - 1) / 8.0
    angle = 2 * np.pi * p * m_gamma + p * np.pi * (N - 1) / N * Z
    return float(w * np.sin(2 * np.pi * phase) * np.cos(angle) * sin_ratio(p, Z, singular_z)
                 / (np.pi ** 2 * R ** ((d + 1) / 2.0) * p ** ((d + 3) / 2.0)))


def resonant_q_sum(
    spec: TranslationOrbitSpec,
    eps: float = 0.1,
    P_max: int = 64,
    restrict_to_resonant: bool = False,
) -> float:
    """
    2 sum_p sum_m q(r, alpha, x, N, m, p) over the primitive m of the resonant set

    With restrict_to_resonant only the (m, p) pairs whose frequency lies in the
    resonant set are kept, which reproduces fourier_discrepancy(resonant) term by term.
    """
    if not spec.body.symmetric:
        raise VariantMismatchError("the q-sum is defined for symmetric bodies")
    if P_max < 1:
        raise DomainError(f"P_max must be >= 1, got {P_max}")
    if spec.N == 0:
        return 0.0

    d = spec.d
    rb = reduced_basis(dani_lattice(spec.N, spec.alpha))
    harmonics = resonant_set(spec.N, spec.alpha, eps, rb=rb)
    if not harmonics:
        return 0.0

    scale = spec.N ** (1.0 / d)
    gammas = scale * (rb.vectors[:d, :].T @ (spec.x - spec.body.center))
    singular_z = float(get_config().get('limit_law.singular_z', 1e-12))

    if restrict_to_resonant:
        pairs = [(h.m, h.multiplicity) for h in harmonics]
        weight = 1.0
    else:
        distinct = {h.m.m: h.m for h in harmonics}
        pairs = [(m, p) for m in distinct.values() for p in range(1, P_max + 1)]
        weight = 2.0

    total = 0.0
    for m, p in pairs:
        X, Z, _ = lattice_point_of(m, rb)
        m_gamma = float(np.dot(m.as_array(), gammas))
        total += q_term(spec.body, spec.r_eff, spec.N, X, Z, p, m_gamma, singular_z)
    return weight * total


# ======================================================================
# KESTEN (d = 1 INTERVALS)
# ======================================================================

def kesten_discrepancy(r: float, x: float, alpha: float, N: int) -> float:
    """#{n < N : x + n alpha mod 1 in [0, r]} - N r"""
    if not 0.0 < r < 1.0:
        raise DomainError(f"r must lie in (0, 1), got {r}")
    if N < 0:
        raise DomainError(f"N must be >= 0, got {N}")
    chunk = int(get_config().get('discrepancy.chunk_size', 65536))
    count = 0
    for start in range(0, N, chunk):
        n = np.arange(start, min(start + chunk, N), dtype=float)
        points = np.mod(x + n * alpha, 1.0)
        count += int(np.count_nonzero(points <= r))
    return count - N * r


# ======================================================================
# SAMPLERS
# ======================================================================

def parse_density(density: Optional[str]) -> Optional[Tuple[float, float]]:
    """None for uniform; (a, b) for 'beta:a,b'"""
    if density is None or density == "uniform":
        return None
    try:
        kind, params = density.split(":", 1)
        a, b = (float(v) for v in params.split(","))
    except ValueError as e:
        raise DomainError(f"invalid density: {density!r}") from e
    if kind != "beta" or a <= 0 or b <= 0:
        raise DomainError(f"invalid density: {density!r}")
    return a, b


def draw_unit(rng: np.random.Generator, size, density: Optional[Tuple[float, float]]) -> np.ndarray:
    """Product draw on [0,1)^size: uniform or beta"""
    if density is None:
        return rng.random(size)
    return rng.beta(density[0], density[1], size)


def warn_density(density: Optional[str]) -> None:
    if parse_density(density) is not None:
        logger.warning(f"Sampling density {density}: only smooth densities are covered by the limit theorems")


def _translation_worker(item) -> Dict[str, Any]:
    seed_seq, sample_id, job = item
    rng = stream(seed_seq)
    d, a, b = job["d"], job["a"], job["b"]
    density = parse_density(job["density"])
    r = a + (b - a) * float(draw_unit(rng, 1, density)[0])
    body = body_from_dict(job["body"])
    rejected = 0
    if job["parametric"]:
        # alpha is conditioned on the largest scale b, so its law does not depend on r
        alpha, rejected = draw_section_alpha(rng, d, b, lambda g, size: draw_unit(g, size, density))
        body = translated(slanted_cylinder_section(alpha), body.center)
    else:
        alpha = draw_unit(rng, d, density)
    x = draw_unit(rng, d, density)

    spec = TranslationOrbitSpec(body=body, r=r, alpha=alpha, x=x, N=job["N"], gamma=job["gamma"])
    raw = discrepancy_direct(spec)

    row: Dict[str, Any] = {"sample_id": sample_id, "r": r}
    row.update({f"alpha{i + 1}": float(v) for i, v in enumerate(alpha)})
    row.update({f"x{i + 1}": float(v) for i, v in enumerate(x)})
    row["raw_discrepancy"] = raw
    row["normalized"] = raw / normalization(d, r, spec.N, spec.gamma)
    if job["parametric"]:
        row["alpha_resamples"] = rejected
    return row


def sample_translation(
    body: ConvexBody,
    a: float,
    b: float,
    N: int,
    samples: int,
    seed: int,
    gamma: float = 0.0,
    parametric: bool = False,
    density: Optional[str] = None,
    max_workers: Optional[int] = None,
) -> pd.DataFrame:
    """
    Normalized discrepancies at i.i.d. (r, alpha, x), r in [a, b]

    With parametric=True each sample uses the slanted-cylinder section C_alpha
    of its own alpha (centered like body). alpha is then drawn conditioned on
    b * C_alpha fitting in the unit cube; rejected draws are counted in the
    alpha_resamples column.
    """
    if samples < 1:
        raise DomainError(f"samples must be >= 1, got {samples}")
    if not 0 < a <= b:
        raise DomainError(f"need 0 < a <= b, got [{a}, {b}]")
    if parametric:
        section_alpha_bound(b)
    parse_density(density)
    warn_density(density)

    job = {"d": body.dimension, "a": a, "b": b, "N": int(N), "gamma": float(gamma),
           "parametric": parametric, "density": density, "body": body_to_dict(body)}
    items = [(s, i, job) for i, s in enumerate(spawn_seeds(seed, samples))]
    rows = parallel_map(_translation_worker, items, max_workers, desc="translation samples")
    frame = pd.DataFrame(rows)
    if parametric and frame["alpha_resamples"].any():
        logger.info(f"Slanted sections: {int(frame['alpha_resamples'].sum())} alpha draws rejected at scale {b}")
    return frame


def sample_translation_ecdf(body: ConvexBody, a: float, b: float, gamma: float, N: int,
                            samples: int, seed: int, **kwargs) -> EmpiricalCDF:
    frame = sample_translation(body, a, b, N, samples, seed, gamma=gamma, **kwargs)
    return EmpiricalCDF.from_samples(frame["normalized"].to_numpy())


def _kesten_worker(item) -> Dict[str, Any]:
    seed_seq, sample_id, r, N = item
    rng = stream(seed_seq)
    x, alpha = rng.random(2)
    raw = kesten_discrepancy(r, float(x), float(alpha), N)
    return {"sample_id": sample_id, "r": r, "alpha1": float(alpha), "x1": float(x),
            "raw_discrepancy": raw, "normalized": raw / math.log(N)}


def sample_kesten(r: float, N: int, samples: int, seed: int,
                  max_workers: Optional[int] = None) -> pd.DataFrame:
    """D_N / ln N at uniform (x, alpha)"""
    if N < 2:
        raise DomainError(f"N must be >= 2, got {N}")
    items = [(s, i, float(r), int(N)) for i, s in enumerate(spawn_seeds(seed, samples))]
    return pd.DataFrame(parallel_map(_kesten_worker, items, max_workers, desc="kesten samples"))


def _resonant_worker(item) -> List[Dict[str, Any]]:
    seed_seq, sample_id, job = item
    rng = stream(seed_seq)
    d, a, b = job["d"], job["a"], job["b"]
    r = a + (b - a) * float(rng.random())
    alpha = rng.random(d)
    x = rng.random(d)
    spec = TranslationOrbitSpec(body=body_from_dict(job["body"]), r=r, alpha=alpha, x=x, N=job["N"])
    direct = normalized_discrepancy(spec)
    rows = []
    for eps in job["eps_list"]:
        approx = fourier_discrepancy(spec, mode="resonant", eps=eps)
        rows.append({"sample_id": sample_id, "eps": eps, "direct": direct,
                     "resonant": approx, "residual": direct - approx})
    return rows


def resonant_reduction_profile(
    body: ConvexBody,
    a: float,
    b: float,
    N: int,
    eps_list: Sequence[float],
    samples: int,
    seed: int,
    max_workers: Optional[int] = None,
) -> pd.DataFrame:
    """Residuals normalized - resonant Fourier sum, one row per (sample, eps)"""
    job = {"d": body.dimension, "a": a, "b": b, "N": int(N),
           "eps_list": [float(e) for e in eps_list], "body": body_to_dict(body)}
    items = [(s, i, job) for i, s in enumerate(spawn_seeds(seed, samples))]
    results = parallel_map(_resonant_worker, items, max_workers, desc="resonant residuals")
    return pd.DataFrame([row for rows in results for row in rows])
