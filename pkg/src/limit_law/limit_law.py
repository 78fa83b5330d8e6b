"""
Limit-Law Series
Truncated limit series on the space of unimodular lattices (translations,
d >= 4 flows, geodesics), the d=2 flow law, Monte Carlo samplers and
tail-variance diagnostics for the truncation
"""

from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Callable, Dict, Optional, Sequence, Tuple, Union, Any
import json
import math
import sys

import numpy as np
import pandas as pd
from scipy import special

sys.path.append(str(Path(__file__).parent.parent))

from discrepancy.flows import parse_box_density
from geometry.convex_body import (
    ConvexBody, body_to_dict, draw_section_alpha, section_alpha_bound, slanted_cylinder_section, translated,
)
from geometry.fourier import exact_ball_coefficients, fourier_coeff_herz_complex
from lattices.lattice_space import haar_sample, primitive_array, reduced_basis
from quality.ecdf import EmpiricalCDF
from utils.config_loader import get_config
from utils.errors import DomainError, UnsupportedDimensionError, VariantMismatchError
from utils.logger import get_logger
from utils.parallel import parallel_map
from utils.rng import spawn_seeds

logger = get_logger(__name__)

VARIANTS = (
    "translation_sym",
    "translation_nonsym",
    "flow_d2",
    "flow_dge4_sym",
    "flow_dge4_nonsym",
    "geodesic",
)
SYMMETRIC_VARIANTS = ("translation_sym", "flow_dge4_sym")
NONSYMMETRIC_VARIANTS = ("translation_nonsym", "flow_dge4_nonsym")
MAX_RESAMPLES = 10
CHEBYSHEV_95 = math.sqrt(20.0)


# ======================================================================
# CONFIGURATION AND SAMPLE POINTS
# ======================================================================

@dataclass(frozen=True, eq=False)
class LimitLawConfig:
    """
    Cutoffs and sampler settings for one limit series

    d is the dimension of the torus carrying the orbit. Translation variants
    sample lattices in R^{d+1}; d >= 4 flow and geodesic variants in R^d; the d=2
    flow law uses no lattice. parametric_scale conditions the slanted-section
    alpha the way the orbit sampler does at its largest scale b.
    """
    variant: str
    d: int
    body: Optional[ConvexBody] = None
    M: Optional[int] = None
    P_max: Optional[int] = None
    samples: int = 1000
    seed: int = 42
    n_haar: Optional[int] = None
    haar_method: str = "horospherical"
    K_max: Optional[int] = None
    r: float = 1.0
    coefficients: str = "exact"
    v: Optional[Tuple[float, ...]] = None
    v_density: str = "box:0.5,1.5"
    phase_shift: Optional[float] = None
    parametric: bool = False
    parametric_scale: Optional[float] = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise DomainError(f"unknown variant: {self.variant}")
        config = get_config()
        for name, key, fallback in (("M", "limit_law.M", 8), ("P_max", "limit_law.P_max", 64),
                                    ("K_max", "limit_law.K_max", 128), ("n_haar", "sampling.n_haar", 1_000_000)):
            if getattr(self, name) is None:
                object.__setattr__(self, name, int(config.get(key, fallback)))

        if self.M < 0:
            raise DomainError(f"M must be >= 0, got {self.M}")
        if self.P_max < 1:
            raise DomainError(f"P_max must be >= 1, got {self.P_max}")
        if self.samples < 1:
            raise DomainError(f"samples must be >= 1, got {self.samples}")
        if self.v is not None:
            object.__setattr__(self, "v", tuple(float(c) for c in self.v))

        if self.variant in ("flow_dge4_sym", "flow_dge4_nonsym", "geodesic") and self.d < 4:
            raise UnsupportedDimensionError(f"{self.variant} needs d >= 4, got d={self.d}")
        if self.variant == "flow_d2" and self.d != 2:
            raise DomainError(f"flow_d2 needs d=2, got d={self.d}")
        if self.variant.startswith("translation") and self.d < 1:
            raise DomainError(f"d must be >= 1, got {self.d}")

        if self.variant != "geodesic" and self.body is None and not self.parametric:
            raise DomainError(f"{self.variant} needs a body")
        if self.body is not None and self.body.dimension != self.d:
            raise DomainError(f"body dimension {self.body.dimension} does not match d={self.d}")
        if self.variant in SYMMETRIC_VARIANTS and self.body is not None and not self.body.symmetric:
            raise VariantMismatchError(f"{self.variant} needs a symmetric body")
        if self.parametric and self.variant != "translation_sym":
            raise DomainError("parametric families are supported for translation_sym only")
        if self.parametric_scale is not None:
            section_alpha_bound(self.parametric_scale)
        if self.variant == "flow_d2":
            if self.coefficients not in ("exact", "herz"):
                raise DomainError(f"unknown coefficient source: {self.coefficients}")
            if self.coefficients == "exact" and self.body.kind != "ball":
                raise DomainError("exact coefficients are available for balls only")
        if self.variant.startswith("flow") and self.v is not None:
            if len(self.v) != self.d:
                raise DomainError(f"v must have {self.d} coordinates")
            if self.variant != "flow_d2" and self.v[-1] == 0:
                raise DomainError("v must have a nonzero last coordinate")

    @property
    def lattice_dim(self) -> int:
        if self.variant.startswith("translation"):
            return self.d + 1
        if self.variant == "flow_d2":
            return 0
        return self.d

    @property
    def shift(self) -> float:
        if self.phase_shift is not None:
            return float(self.phase_shift)
        if self.variant == "geodesic":
            return 0.0
        return (self.d - 1) / 8.0

    def echo(self) -> Dict[str, Any]:
        """Resolved settings for JSON summaries"""
        return {
            "variant": self.variant, "d": self.d, "M": self.M, "P_max": self.P_max,
            "samples": self.samples, "seed": self.seed, "n_haar": self.n_haar,
            "haar_method": self.haar_method, "K_max": self.K_max, "r": self.r,
            "coefficients": self.coefficients, "v": self.v, "v_density": self.v_density,
            "phase_shift": self.shift, "parametric": self.parametric, "parametric_scale": self.parametric_scale,
            "body": None if self.body is None else body_to_dict(self.body),
        }


@dataclass(frozen=True, eq=False)
class LimitSamplePoint:
    """
    A point (L, theta, b[, b']) of the lattice-torus space

    basis columns are the reduced basis e_1..e_n of L; b and b_prime are aligned
    with primitive_array(n, M). Flow d=2 points carry (y, theta) only.
    """
    basis: Optional[np.ndarray]
    theta: np.ndarray
    b: np.ndarray = field(default_factory=lambda: np.zeros(0))
    b_prime: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None
    body: Optional[ConvexBody] = None
    phase_seeds: Optional[Tuple[np.random.SeedSequence, ...]] = None
    resampled: int = 0
    short_flags: int = 0

    @property
    def dim(self) -> int:
        return 0 if self.basis is None else self.basis.shape[0]


def sin_ratio(p, Z, singular_z: float = 1e-12, rho: float = 1.0):
    """
    sin(pi p rho Z) / Z, continuous across Z = 0

    The sine is reduced by the nearest integer first, so integer p rho Z gives 0 exactly.
    """
    p = np.asarray(p, dtype=float)
    Z = np.asarray(Z, dtype=float)
    arg = p * rho * Z
    nearest = np.round(arg)
    parity = 1.0 - 2.0 * np.mod(nearest, 2.0)
    sine = parity * np.sin(np.pi * (arg - nearest))
    small = np.abs(Z) < singular_z
    return np.where(small, np.pi * p * rho, sine / np.where(small, 1.0, Z))


@lru_cache(maxsize=32)
def cached_primitives(n: int, M: int) -> np.ndarray:
    rows = primitive_array(n, M)
    rows.setflags(write=False)
    return rows


def _child(seed_seq: np.random.SeedSequence, i: int) -> np.random.SeedSequence:
    """i-th child without mutating seed_seq"""
    return np.random.SeedSequence(entropy=seed_seq.entropy, spawn_key=tuple(seed_seq.spawn_key) + (i,),
                                  pool_size=seed_seq.pool_size)


def phases_for(pt: LimitSamplePoint, count: int) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Phases for the first count primitive vectors (the phase lists are prefix-stable)"""
    if count <= pt.b.size:
        return pt.b[:count], None if pt.b_prime is None else pt.b_prime[:count]
    if pt.phase_seeds is None:
        raise DomainError(f"sample point carries {pt.b.size} phases, {count} requested")
    b = np.random.default_rng(pt.phase_seeds[0]).random(count)
    b_prime = None if pt.b_prime is None else np.random.default_rng(pt.phase_seeds[1]).random(count)
    return b, b_prime


def _short_count(basis: np.ndarray, rows: np.ndarray, threshold: float) -> int:
    X = rows @ basis[:-1, :].T
    return int(np.sum(np.linalg.norm(X, axis=1) < threshold))


def _draw_v(cfg: LimitLawConfig, rng: np.random.Generator) -> Optional[np.ndarray]:
    if not cfg.variant.startswith("flow"):
        return None
    if cfg.v is not None:
        return np.asarray(cfg.v, dtype=float)
    lo, hi = parse_box_density(cfg.v_density)
    while True:
        v = lo + (hi - lo) * rng.random(cfg.d)
        if v[-1] != 0:
            return v


def build_sample_point(cfg: LimitLawConfig, seed_seq: np.random.SeedSequence) -> LimitSamplePoint:
    """Haar lattice with its reduced basis, uniform theta and i.i.d. uniform phases"""
    streams = [np.random.default_rng(_child(seed_seq, i)) for i in range(3)]
    phase_seeds = (_child(seed_seq, 3), _child(seed_seq, 4))
    lattice_rng, theta_rng, extra_rng = streams

    if cfg.variant == "flow_d2":
        y = theta_rng.random(2)
        theta = theta_rng.random(2)
        return LimitSamplePoint(basis=None, theta=theta, y=y, v=_draw_v(cfg, extra_rng))

    n = cfg.lattice_dim
    rows = cached_primitives(n, cfg.M)
    threshold = float(get_config().get('limit_law.short_projection', 1e-8))
    resample = bool(get_config().get('limit_law.resample_short', True))

    resampled = 0
    while True:
        L = haar_sample(n, lattice_rng, method=cfg.haar_method, n_haar=cfg.n_haar)
        basis = reduced_basis(L).vectors
        short = _short_count(basis, rows, threshold) if rows.size else 0
        if not short or not resample or resampled >= MAX_RESAMPLES:
            break
        resampled += 1

    theta = theta_rng.random(n)
    b = np.random.default_rng(phase_seeds[0]).random(rows.shape[0])
    b_prime = None
    if cfg.variant in NONSYMMETRIC_VARIANTS:
        b_prime = np.random.default_rng(phase_seeds[1]).random(rows.shape[0])

    body = None
    if cfg.parametric:
        alpha, _ = draw_section_alpha(extra_rng, cfg.d, cfg.parametric_scale)
        center = cfg.body.center if cfg.body is not None else np.full(cfg.d, 0.5)
        body = translated(slanted_cylinder_section(alpha), center)

    return LimitSamplePoint(basis=basis, theta=theta, b=b, b_prime=b_prime, v=_draw_v(cfg, extra_rng),
                            body=body, phase_seeds=phase_seeds, resampled=resampled, short_flags=short)


def negated_phases(pt: LimitSamplePoint, d: int) -> LimitSamplePoint:
    """b_m -> -b_m + (d-1)/4 (mod 1), which negates the p=1 terms of the symmetric series"""
    shift = (d - 1) / 4.0
    b = np.mod(-pt.b + shift, 1.0)
    b_prime = None if pt.b_prime is None else np.mod(-pt.b_prime + shift, 1.0)
    return replace(pt, b=b, b_prime=b_prime, phase_seeds=None)


# ======================================================================
# LATTICE SERIES
# ======================================================================

def _body_for(pt: LimitSamplePoint, cfg: LimitLawConfig) -> Optional[ConvexBody]:
    return pt.body if pt.body is not None else cfg.body


def _series(
    pt: LimitSamplePoint,
    cfg: LimitLawConfig,
    primitives: Optional[np.ndarray] = None,
    b_override: Optional[Tuple[np.ndarray, Optional[np.ndarray]]] = None,
    block: int = 8192,
) -> Tuple[float, int]:
    """
    Truncated double series over m (rows of primitives) and p <= P_max

    Returns:
        (value, number of m skipped for a pathologically short projection)
    """
    if pt.basis is None:
        raise VariantMismatchError("sample point has no lattice")
    n = pt.dim
    if n != cfg.lattice_dim:
        raise VariantMismatchError(f"{cfg.variant} needs a lattice of dimension {cfg.lattice_dim}, got {n}")
    rows = cached_primitives(n, cfg.M) if primitives is None else np.atleast_2d(np.asarray(primitives))
    if rows.size == 0:
        return 0.0, 0
    b, b_prime = b_override if b_override is not None else phases_for(pt, rows.shape[0])
    nonsym = cfg.variant in NONSYMMETRIC_VARIANTS
    if nonsym and b_prime is None:
        raise VariantMismatchError(f"{cfg.variant} needs second phases b'")

    config = get_config()
    threshold = float(config.get('limit_law.short_projection', 1e-8))
    singular_z = float(config.get('limit_law.singular_z', 1e-12))

    d = cfg.d
    shift = cfg.shift
    flow = cfg.variant.startswith("flow")
    body = _body_for(pt, cfg)
    p = np.arange(1, cfg.P_max + 1, dtype=float)
    p_decay = p ** (-(d + 3) / 2.0)

    if flow:
        v = np.asarray(pt.v if pt.v is not None else cfg.v, dtype=float)
        rho = float(v[-1])
        slope = v[:-1] / rho
    else:
        rho = 1.0

    total, skipped = 0.0, 0
    for start in range(0, rows.shape[0], block):
        m = rows[start:start + block].astype(float)
        vec = m @ pt.basis.T
        X, Z = vec[:, :-1], vec[:, -1]
        R = np.linalg.norm(X, axis=1)
        if flow:
            s = X @ slope
            Q = np.sqrt(R * R + s * s)
            size = Q
            scale = rho * Q ** ((d + 1) / 2.0)
            direction = np.column_stack([X, -s])
        else:
            size = R
            scale = R ** ((d + 1) / 2.0)
            direction = X

        ok = size >= threshold
        skipped += int(np.sum(~ok))
        if not np.any(ok):
            continue
        m, Z, size, scale, direction = m[ok], Z[ok], size[ok], scale[ok], direction[ok]
        bb = b[start:start + block][ok]
        mtheta = m @ pt.theta

        ratio = sin_ratio(p[None, :], Z[:, None], singular_z, rho)
        px = np.outer(mtheta, p)
        if cfg.variant == "geodesic":
            angular = np.cos(2 * np.pi * px) * np.sin(2 * np.pi * np.outer(bb, p))
            weight = np.ones_like(Z)
            prefactor = 2.0 / np.pi ** 2
        else:
            unit = direction / size[:, None]
            w_plus = body.centered_curvature(unit) ** -0.5
            pb = np.outer(bb, p)
            if nonsym:
                w_minus = body.centered_curvature(-unit) ** -0.5
                pbp = np.outer(b_prime[start:start + block][ok], p)
                angular = (w_plus[:, None] * np.sin(2 * np.pi * (pb + px - shift))
                           + w_minus[:, None] * np.sin(2 * np.pi * (pbp - px - shift)))
                weight = np.ones_like(Z)
                prefactor = 1.0 / np.pi ** 2
            else:
                angular = np.cos(2 * np.pi * px) * np.sin(2 * np.pi * (pb - shift))
                weight = w_plus
                prefactor = 2.0 / np.pi ** 2

        terms = angular * ratio * p_decay[None, :]
        total += prefactor * float(np.sum(weight / scale * terms.sum(axis=1)))
    return total, skipped


def _check_variant(cfg: LimitLawConfig, allowed: Sequence[str]) -> None:
    if cfg.variant not in allowed:
        raise VariantMismatchError(f"evaluator expects one of {tuple(allowed)}, got {cfg.variant}")


def eval_translation_sym(pt: LimitSamplePoint, cfg: LimitLawConfig,
                         primitives: Optional[np.ndarray] = None) -> float:
    """Symmetric-body series with prefactor 2/pi^2"""
    _check_variant(cfg, ("translation_sym",))
    body = _body_for(pt, cfg)
    if not body.symmetric:
        raise VariantMismatchError("translation_sym needs a symmetric body")
    return _series(pt, cfg, primitives)[0]


def eval_translation_nonsym(pt: LimitSamplePoint, cfg: LimitLawConfig,
                            primitives: Optional[np.ndarray] = None) -> float:
    """General-body series with prefactor 1/pi^2 and phases (b, b')"""
    _check_variant(cfg, ("translation_nonsym",))
    return _series(pt, cfg, primitives)[0]


def eval_flow_dge4(pt: LimitSamplePoint, cfg: LimitLawConfig,
                   primitives: Optional[np.ndarray] = None) -> float:
    """
    Flow series for d >= 4 with v = rho (alpha_1, ..., alpha_{d-1}, 1)

    Denominators rho Q_m^{(d+1)/2} Z_m with Q_m^2 = R_m^2 + (alpha, X_m)^2; the curvature
    is taken at the unit normal (X_m, -(alpha, X_m)) / Q_m.
    """
    _check_variant(cfg, ("flow_dge4_sym", "flow_dge4_nonsym"))
    return _series(pt, cfg, primitives)[0]


def eval_geodesic(pt: LimitSamplePoint, cfg: LimitLawConfig,
                  primitives: Optional[np.ndarray] = None) -> float:
    """v-free geodesic series (unit curvature, phases sin(2 pi p b_m))"""
    _check_variant(cfg, ("geodesic",))
    return _series(pt, cfg, primitives)[0]


# ======================================================================
# FLOW LAW IN d = 2
# ======================================================================

@lru_cache(maxsize=8)
def disk_frequencies(K_max: int) -> np.ndarray:
    """All k in Z^2 with 0 < |k| <= K_max"""
    axis = np.arange(-K_max, K_max + 1)
    grid = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
    norm2 = np.sum(grid * grid, axis=1)
    grid = grid[(norm2 > 0) & (norm2 <= K_max * K_max)]
    grid.setflags(write=False)
    return grid


def flow_d2_coefficients(body: ConvexBody, r: float, source: str = "exact") -> Callable[[np.ndarray], np.ndarray]:
    """Coefficient provider k -> c_k of chi_{r C0 + center}"""
    if source == "exact":
        if body.kind != "ball":
            raise DomainError("exact coefficients are available for balls only")
        radius = r * body.radius
        return lambda k: exact_ball_coefficients(2, radius, k, center=body.center)
    if source == "herz":
        return lambda k: fourier_coeff_herz_complex(body, r, k)
    raise DomainError(f"unknown coefficient source: {source}")


def eval_flow_d2(
    y: Sequence[float],
    theta: Sequence[float],
    v: Sequence[float],
    coeffs: Union[Callable[[np.ndarray], np.ndarray], np.ndarray],
    K_max: int = 128,
    return_flags: bool = False,
):
    """
    Re sum_{0<|k|<=K_max} c_k e^{2 pi i (k, y)} sin(pi (k, theta)) / (pi (k, v))

    Frequencies with |(k, v)| below the small-divisor guard are skipped and counted.
    """
    k = disk_frequencies(int(K_max)).astype(float)
    c = coeffs(k) if callable(coeffs) else np.asarray(coeffs)
    if c.shape[0] != k.shape[0]:
        raise DomainError(f"expected {k.shape[0]} coefficients, got {c.shape[0]}")
    guard = float(get_config().get('limit_law.small_divisor', 1e-14))

    kv = k @ np.asarray(v, dtype=float)
    keep = np.abs(kv) >= guard
    skipped = int(np.sum(~keep))
    k, c, kv = k[keep], c[keep], kv[keep]
    phase = np.exp(2j * np.pi * (k @ np.asarray(y, dtype=float)))
    terms = c * phase * np.sin(np.pi * (k @ np.asarray(theta, dtype=float))) / (np.pi * kv)
    value = float(np.real(np.sum(terms)))
    if return_flags:
        return value, skipped
    return value


# ======================================================================
# DISPATCH AND SAMPLERS
# ======================================================================

def evaluate(pt: LimitSamplePoint, cfg: LimitLawConfig,
             coeffs: Optional[np.ndarray] = None) -> Tuple[float, int]:
    """Value of the configured series at pt, with its skipped-term count"""
    if cfg.variant == "flow_d2":
        if coeffs is None:
            provider = flow_d2_coefficients(cfg.body, cfg.r, cfg.coefficients)
            coeffs = provider(disk_frequencies(cfg.K_max).astype(float))
        return eval_flow_d2(pt.y, pt.theta, pt.v, coeffs, cfg.K_max, return_flags=True)
    return _series(pt, cfg)


def _limit_worker(item) -> Dict[str, Any]:
    seed_seq, sample_id, cfg = item
    pt = build_sample_point(cfg, seed_seq)
    coeffs = None
    if cfg.variant == "flow_d2":
        coeffs = _flow_coefficients_cached(cfg)
    value, skipped = evaluate(pt, cfg, coeffs)
    return {"sample_id": sample_id, "value": value, "skipped_terms": skipped,
            "short_flags": pt.short_flags, "resampled": pt.resampled}


_COEFF_CACHE: Dict[str, np.ndarray] = {}


def _flow_coefficients_cached(cfg: LimitLawConfig) -> np.ndarray:
    """Per-process cache keyed by body, scale, source and K_max"""
    key = json.dumps([body_to_dict(cfg.body), cfg.r, cfg.coefficients, cfg.K_max], sort_keys=True)
    if key not in _COEFF_CACHE:
        _COEFF_CACHE.clear()
        provider = flow_d2_coefficients(cfg.body, cfg.r, cfg.coefficients)
        _COEFF_CACHE[key] = provider(disk_frequencies(cfg.K_max).astype(float))
    return _COEFF_CACHE[key]


def sample_limit(cfg: LimitLawConfig, max_workers: Optional[int] = None) -> pd.DataFrame:
    """Monte Carlo draws of the configured series: one row per sample point"""
    logger.info(f"Sampling {cfg.samples} limit-law values ({cfg.variant}, M={cfg.M}, P_max={cfg.P_max})")
    items = [(s, i, cfg) for i, s in enumerate(spawn_seeds(cfg.seed, cfg.samples))]
    frame = pd.DataFrame(parallel_map(_limit_worker, items, max_workers, desc=f"limit {cfg.variant}"))

    flagged = int(frame["short_flags"].gt(0).sum())
    resampled = int(frame["resampled"].sum())
    skipped = int(frame["skipped_terms"].sum())
    if flagged or resampled:
        logger.warning(f"Short projections: {flagged} flagged samples, {resampled} lattice resamples")
    if skipped:
        logger.warning(f"{skipped} terms skipped (short projection or small divisor)")
    return frame


def sample_limit_ecdf(cfg: LimitLawConfig, max_workers: Optional[int] = None) -> EmpiricalCDF:
    return EmpiricalCDF.from_samples(sample_limit(cfg, max_workers)["value"].to_numpy())


# ======================================================================
# TAIL DIAGNOSTICS
# ======================================================================

def _mode_data(pt: LimitSamplePoint, rows: np.ndarray, body: ConvexBody):
    vec = rows.astype(float) @ pt.basis.T
    X, Z = vec[:, :-1], vec[:, -1]
    R = np.linalg.norm(X, axis=1)
    safe = np.where(R > 0, R, 1.0)
    curvature = body.centered_curvature(X / safe[:, None])
    return X, Z, R, curvature


def tail_variance(pt: LimitSamplePoint, cfg: LimitLawConfig,
                  M: Optional[int] = None, M_low: int = 0) -> Tuple[pd.DataFrame, float]:
    """
    Gamma(theta, Z_m) and Var(xi_m) = Gamma / (K(X_m/R_m) R_m^{d+1}) for M_low < ||m|| <= M

    Gamma sums p <= P_max and adds min(zeta(d+3, P+1)/Z^2, pi^2 zeta(d+1, P+1)) for p > P_max.

    Returns:
        (per-m table, total variance)
    """
    if not cfg.variant.startswith("translation"):
        raise VariantMismatchError("tail variance is defined for translation variants")
    M = cfg.M if M is None else M
    d = cfg.d
    rows = cached_primitives(pt.dim, M)
    if M_low > 0:
        rows = rows[np.max(np.abs(rows), axis=1) > M_low]
    columns = [f"m{i + 1}" for i in range(pt.dim)] + ["R", "Z", "gamma", "gamma_tail", "variance"]
    if rows.size == 0:
        return pd.DataFrame(columns=columns), 0.0

    body = _body_for(pt, cfg)
    threshold = float(get_config().get('limit_law.short_projection', 1e-8))
    singular_z = float(get_config().get('limit_law.singular_z', 1e-12))
    _, Z, R, curvature = _mode_data(pt, rows, body)
    P = cfg.P_max
    p = np.arange(1, P + 1, dtype=float)

    mtheta = rows.astype(float) @ pt.theta
    ratio = sin_ratio(p[None, :], Z[:, None], singular_z)
    gamma = np.sum(np.cos(2 * np.pi * np.outer(mtheta, p)) ** 2 * ratio ** 2 * p[None, :] ** -(d + 3.0), axis=1)
    with np.errstate(divide="ignore"):
        tail = np.minimum(special.zeta(d + 3.0, P + 1) / Z ** 2, np.pi ** 2 * special.zeta(d + 1.0, P + 1))
    gamma_total = gamma + tail
    ok = R >= threshold
    variance = np.where(ok, gamma_total / (curvature * np.where(ok, R, 1.0) ** (d + 1)), 0.0)

    table = pd.DataFrame(rows, columns=columns[:pt.dim])
    table["R"] = R
    table["Z"] = Z
    table["gamma"] = gamma
    table["gamma_tail"] = tail
    table["variance"] = variance
    return table, float(variance.sum())


def truncation_bound(pt: LimitSamplePoint, cfg: LimitLawConfig) -> float:
    """
    Bound on |value(2M, 2P_max) - value(M, P_max)| holding with probability >= 95%
    over the phases (Chebyshev on the new modes plus the deterministic p-tail)
    """
    if not cfg.variant.startswith("translation"):
        raise VariantMismatchError("truncation bounds are defined for translation variants")
    d = cfg.d
    _, new_variance = tail_variance(pt, replace(cfg, P_max=2 * cfg.P_max), M=2 * cfg.M, M_low=cfg.M)

    rows = cached_primitives(pt.dim, cfg.M)
    p_tail = 0.0
    if rows.size:
        body = _body_for(pt, cfg)
        threshold = float(get_config().get('limit_law.short_projection', 1e-8))
        _, Z, R, curvature = _mode_data(pt, rows, body)
        ok = R >= threshold
        P = cfg.P_max
        with np.errstate(divide="ignore"):
            per_m = np.minimum(special.zeta((d + 3) / 2.0, P + 1) / np.abs(Z),
                               np.pi * special.zeta((d + 1) / 2.0, P + 1))
        weight = np.where(ok, curvature ** -0.5 * np.where(ok, R, 1.0) ** (-(d + 1) / 2.0), 0.0)
        p_tail = float(np.sum(weight * per_m))
    return 2.0 / np.pi ** 2 * (CHEBYSHEV_95 * math.sqrt(new_variance) + p_tail)


def doubled_value(pt: LimitSamplePoint, cfg: LimitLawConfig) -> float:
    """Series value at cutoffs (2M, 2P_max) with the same phases"""
    return _series(pt, replace(cfg, M=2 * cfg.M, P_max=2 * cfg.P_max))[0]
