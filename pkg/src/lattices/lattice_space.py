"""
Space of Unimodular Lattices
Dani lattices L(N, alpha) = g_{ln N} Lambda_alpha Z^{d+1}, the greedy reduced
basis e_1..e_n, primitive vectors, resonant harmonics and approximate Haar sampling
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Dict, Any
import math
import sys

import numpy as np
import pandas as pd
from scipy.stats import special_ortho_group

sys.path.append(str(Path(__file__).parent.parent))

from lattices.reduction import enumerate_ellipsoid, integer_det, lll_reduce
from utils.config_loader import get_config
from utils.errors import DomainError, ReductionError
from utils.logger import get_logger
from utils.parallel import parallel_map
from utils.rng import spawn_seeds, stream

logger = get_logger(__name__)

def _setting(key: str, default: float) -> float:
    return float(get_config().get(key, default))


# ======================================================================
# TYPES
# ======================================================================

@dataclass(frozen=True, eq=False)
class UnimodularLattice:
    """Lattice spanned by the columns of basis, renormalized to covolume 1"""
    basis: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        basis = np.atleast_2d(np.asarray(self.basis, dtype=float))
        n = basis.shape[0]
        if basis.shape != (n, n) or n < 1:
            raise DomainError(f"basis must be square, got {basis.shape}")
        det = abs(float(np.linalg.det(basis)))
        if not np.isfinite(det) or det == 0.0:
            raise ReductionError("degenerate lattice basis")
        if abs(det - 1.0) > 1e-15:
            basis = basis / det ** (1.0 / n)
        basis.setflags(write=False)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "dim", n)

    def vectors(self, coeffs: np.ndarray) -> np.ndarray:
        """Lattice vectors for integer coefficient rows"""
        return np.asarray(coeffs, dtype=float) @ self.basis.T


@dataclass(frozen=True, eq=False)
class ReducedBasis:
    """Greedy reduced basis: vectors[:, i] = e_{i+1} = basis @ coeffs[:, i]"""
    vectors: np.ndarray
    coeffs: np.ndarray

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    @property
    def lengths(self) -> np.ndarray:
        return np.linalg.norm(self.vectors, axis=0)

    def e(self, i: int) -> np.ndarray:
        """e_i, 1-based as in the text"""
        return self.vectors[:, i - 1]


@dataclass(frozen=True)
class PrimitiveVector:
    m: Tuple[int, ...]

    def __post_init__(self):
        m = tuple(int(v) for v in self.m)
        if math.gcd(*m) != 1:
            raise DomainError(f"{m} is not primitive")
        if next(v for v in m if v != 0) < 0:
            raise DomainError(f"{m}: first nonzero component must be positive")
        object.__setattr__(self, "m", m)

    def as_array(self) -> np.ndarray:
        return np.array(self.m, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class ResonantHarmonic:
    """
    Frequency k in the resonant set with its Dani image (X, Z) and reduced-basis
    coefficients sign * p * m
    """
    k: Tuple[int, ...]
    k_last: int
    m: PrimitiveVector
    multiplicity: int
    sign: int
    frac: float
    X: np.ndarray
    Z: float
    R: float


# ======================================================================
# MATRICES AND DANI LATTICES
# ======================================================================

def shear(alpha: Sequence[float]) -> np.ndarray:
    """Lambda_alpha: identity with last row (alpha_1, ..., alpha_d, 1)"""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    if not np.all(np.isfinite(alpha)):
        raise DomainError("alpha must be finite")
    n = alpha.size + 1
    m = np.eye(n)
    m[n - 1, :n - 1] = alpha
    return m


def diagonal_flow(T: float, dim: int) -> np.ndarray:
    """g_T = diag(e^{-T/d}, ..., e^{-T/d}, e^T) with d = dim - 1"""
    if dim < 2:
        raise DomainError(f"diagonal flow needs dim >= 2, got {dim}")
    d = dim - 1
    return np.diag(np.concatenate([np.full(d, math.exp(-T / d)), [math.exp(T)]]))


def dani_lattice(N: int, alpha: Sequence[float]) -> UnimodularLattice:
    """L(N, alpha) = g_{ln N} Lambda_alpha Z^{d+1}"""
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    lam = shear(alpha)
    return UnimodularLattice(diagonal_flow(math.log(N), lam.shape[0]) @ lam)


def canonical_last(k: np.ndarray, alpha: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    k_{d+1} with -1/2 < (k, alpha) + k_{d+1} <= 1/2, and {k, alpha}

    Works row-wise on integer arrays of shape (m, d).
    """
    t = np.atleast_2d(k) @ alpha
    k_last = np.floor(0.5 - t)
    return k_last.astype(np.int64), t + k_last


# ======================================================================
# REDUCED BASIS
# ======================================================================

def _canonical_sign(v: np.ndarray, scale: float) -> np.ndarray:
    nz = np.nonzero(np.abs(v) > 1e-12 * scale)[0]
    if nz.size and v[nz[0]] < 0:
        return -v
    return v


def _orthocomplement_projector(chosen: List[np.ndarray], n: int) -> np.ndarray:
    if not chosen:
        return np.eye(n)
    q, _ = np.linalg.qr(np.column_stack(chosen))
    return np.eye(n) - q @ q.T


def _slab_candidates(B: np.ndarray, chosen: List[np.ndarray], mu: float, tol: float = 1e-9) -> np.ndarray:
    """
    Coefficients of every lattice vector whose projection off span(chosen) is at
    most mu and whose span component lies within the covering radius of chosen

    The region is enumerated as an ellipsoid aligned with span(chosen), so long
    chosen-direction runs do not inflate the search.
    """
    if not chosen:
        return enumerate_ellipsoid(B, mu * (1 + tol) + 1e-15)
    n, k = B.shape[0], len(chosen)
    q, _ = np.linalg.qr(np.column_stack(chosen), mode="complete")
    cover = 0.5 * math.sqrt(sum(float(v @ v) for v in chosen))
    weights = np.concatenate([np.full(k, 1.0 / cover), np.full(n - k, 1.0 / mu)])
    return enumerate_ellipsoid(q.T @ B, math.sqrt(2.0) * (1 + tol), weights=weights)


def _greedy_step(B: np.ndarray, U: np.ndarray, chosen: List[np.ndarray], tie: float):
    """Pick the next greedy vector; returns (vector, input-basis coefficients)"""
    n = B.shape[0]
    P = _orthocomplement_projector(chosen, n)
    col_proj = np.linalg.norm(P @ B, axis=0)
    scale = float(np.max(np.linalg.norm(B, axis=0)))
    zero = 1e-10 * scale
    mu_bound = float(np.min(col_proj[col_proj > zero]))

    coeffs = _slab_candidates(B, chosen, mu_bound)
    vecs = coeffs @ B.T
    proj = np.linalg.norm(vecs @ P.T, axis=1)
    admissible = proj > zero
    if not np.any(admissible):
        raise ReductionError("no admissible vector found during greedy reduction")
    vecs, coeffs, proj = vecs[admissible], coeffs[admissible], proj[admissible]

    mu = float(np.min(proj))
    sel = proj <= mu * (1 + tie)
    vecs, coeffs = vecs[sel], coeffs[sel]
    lengths = np.linalg.norm(vecs, axis=1)
    sel = lengths <= float(np.min(lengths)) * (1 + tie)
    vecs, coeffs = vecs[sel], coeffs[sel]

    # Canonical sign, then lexicographically largest coordinates
    candidates = []
    for v, c in zip(vecs, coeffs):
        w = _canonical_sign(v, scale)
        candidates.append((w, c if w is v else -c))
    quant = 1e-9 * scale
    keys = [tuple(np.round(w / quant).astype(np.int64)) for w, _ in candidates]
    best = max(range(len(candidates)), key=lambda i: keys[i])
    w, c = candidates[best]
    return w, U @ c


def reduced_basis(L: UnimodularLattice, tie: Optional[float] = None) -> ReducedBasis:
    """
    Greedy reduced basis: e_1 is a shortest vector; e_i has the shortest nonzero
    projection to the orthocomplement of span(e_1..e_{i-1}) and, among those,
    the shortest length
    """
    tie = _setting('lattice.tie_tolerance', 1e-9) if tie is None else tie
    guard = _setting('lattice.condition_guard', 1e12)
    B, U = lll_reduce(L.basis)
    cond = float(np.linalg.cond(B))
    if not np.isfinite(cond) or cond > guard:
        raise ReductionError(f"reduced basis too ill-conditioned (cond={cond:.3e})")

    chosen, coeff_cols = [], []
    for _ in range(L.dim):
        v, c = _greedy_step(B, U, chosen, tie)
        chosen.append(v)
        coeff_cols.append(c)

    coeffs = np.column_stack(coeff_cols).astype(np.int64)
    det = integer_det(coeffs)
    if abs(det) != 1:
        raise ReductionError(f"greedy vectors do not generate the lattice (det={det})")
    vectors = L.basis @ coeffs
    return ReducedBasis(vectors=vectors, coeffs=coeffs)


def certify_reduced_basis(L: UnimodularLattice, rb: ReducedBasis, tol: Optional[float] = None) -> bool:
    """Re-check the greedy certificates by enumeration"""
    tol = _setting('lattice.tie_tolerance', 1e-9) if tol is None else tol
    n = L.dim
    e1 = float(np.linalg.norm(rb.vectors[:, 0]))
    coeffs = enumerate_ellipsoid(L.basis, e1 * (1 - tol))
    if len(coeffs) and np.min(np.linalg.norm(L.vectors(coeffs), axis=1)) < e1 * (1 - tol):
        return False

    for i in range(1, n):
        chosen = [rb.vectors[:, j] for j in range(i)]
        P = _orthocomplement_projector(chosen, n)
        target = float(np.linalg.norm(P @ rb.vectors[:, i]))
        vecs = L.vectors(_slab_candidates(L.basis, chosen, target))
        proj = np.linalg.norm(vecs @ P.T, axis=1)
        zero = 1e-10 * max(1.0, target)
        if np.any((proj > zero) & (proj < target * (1 - tol))):
            return False
    return abs(integer_det(rb.coeffs)) == 1


def short_vector_flag(rb: ReducedBasis, delta: Optional[float] = None) -> bool:
    """E_N-style flag: some lattice vector is shorter than delta (lattice.short_vector_delta)"""
    delta = _setting('lattice.short_vector_delta', 1e-3) if delta is None else delta
    return bool(rb.lengths[0] < delta)


# ======================================================================
# PRIMITIVE VECTORS
# ======================================================================

def primitive_array(n: int, M: int) -> np.ndarray:
    """
    Primitive m with ||m||_inf <= M and first nonzero component positive

    Ordered by ||m||_inf, then |m|^2, then lexicographically descending, so the
    list for M is a prefix of the list for any larger cutoff.
    """
    if M < 1:
        return np.zeros((0, n), dtype=np.int64)
    axes = [np.arange(-M, M + 1)] * n
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    grid = grid[np.any(grid != 0, axis=1)]
    first = grid[np.arange(grid.shape[0]), np.argmax(grid != 0, axis=1)]
    grid = grid[first > 0]
    grid = grid[np.gcd.reduce(np.abs(grid), axis=1) == 1]

    sup = np.max(np.abs(grid), axis=1)
    sq = np.sum(grid * grid, axis=1)
    order = np.lexsort(tuple(-grid[:, j] for j in reversed(range(n))) + (sq, sup))
    return grid[order].astype(np.int64)


def primitive_vectors(n: int, M: int) -> List[PrimitiveVector]:
    if M < 1:
        raise DomainError(f"M must be >= 1, got {M}")
    return [PrimitiveVector(tuple(row)) for row in primitive_array(n, M)]


def lattice_point_of(m, rb: ReducedBasis) -> Tuple[np.ndarray, float, float]:
    """(m, e) split into X (all but the last coordinate), Z (last) and R = |X|"""
    vec = np.asarray(m.m if isinstance(m, PrimitiveVector) else m, dtype=float)
    v = rb.vectors @ vec
    X = v[:-1]
    return X, float(v[-1]), float(np.linalg.norm(X))


def split_primitive(m_full: np.ndarray) -> Tuple[PrimitiveVector, int, int]:
    """m_full = sign * p * m with m primitive in canonical sign"""
    p = int(np.gcd.reduce(np.abs(m_full)))
    m = m_full // p
    sign = 1 if m[np.nonzero(m)[0][0]] > 0 else -1
    return PrimitiveVector(tuple(sign * m)), p, sign


# ======================================================================
# RESONANT SET
# ======================================================================

def resonance_mask(k: np.ndarray, alpha: np.ndarray, N: int, eps: float):
    """Membership of integer rows k in the resonant set, with ({k,alpha}, k_last)"""
    d = alpha.size
    k = np.atleast_2d(k)
    k_last, frac = canonical_last(k, alpha)
    k2 = np.sum(k.astype(float) ** 2, axis=1)
    n2d = N ** (2.0 / d)
    lower = eps ** ((d + 4) / (d - 1)) * n2d
    upper = n2d / eps
    small = eps ** (-d / 4.0) * N ** (-(d - 1) / (2.0 * d))
    mask = (k2 > lower) & (k2 < upper) & (k2 ** ((d + 1) / 4.0) * np.abs(frac) < small)
    return mask, frac, k_last


def _check_resonance_args(N: int, alpha: np.ndarray, eps: float) -> None:
    if not 0.0 < eps < 1.0:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    if N < 2:
        raise DomainError(f"N must be >= 2, got {N}")
    if alpha.size < 2:
        raise DomainError("the resonant set needs d >= 2")


def brute_force_resonant_set(N: int, alpha: Sequence[float], eps: float) -> List[Tuple[int, ...]]:
    """Direct scan over |k|^2 < N^{2/d}/eps"""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    _check_resonance_args(N, alpha, eps)
    d = alpha.size
    bound = int(math.floor(math.sqrt(N ** (2.0 / d) / eps)))
    axis = np.arange(-bound, bound + 1)
    grid = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    mask, _, _ = resonance_mask(grid, alpha, N, eps)
    return sorted(tuple(int(v) for v in row) for row in grid[mask])


def resonant_set(
    N: int,
    alpha: Sequence[float],
    eps: float,
    rb: Optional[ReducedBasis] = None,
) -> List[ResonantHarmonic]:
    """
    Resonant harmonics k, enumerated in lattice coordinates of L(N, alpha)

    The cusp region eps^{(d+4)/(2(d-1))} < |X| < eps^{-1/2},
    |Z| < eps^{-d/4} |X|^{-(d+1)/2} is covered by dyadic shells in |X|; each shell
    is enumerated inside an axis-aligned ellipsoid and every candidate is then
    re-tested with the exact k-space inequalities.
    """
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    _check_resonance_args(N, alpha, eps)
    d = alpha.size
    L = dani_lattice(N, alpha)
    if rb is None:
        rb = reduced_basis(L)

    r_min = eps ** ((d + 4) / (2.0 * (d - 1)))
    r_max = eps ** -0.5
    candidates = set()
    r_lo = r_min
    while r_lo < r_max:
        r_hi = min(2.0 * r_lo, r_max) * 1.01
        z_max = eps ** (-d / 4.0) * r_lo ** (-(d + 1) / 2.0) * 1.01
        weights = np.concatenate([np.full(d, 1.0 / r_hi), [1.0 / z_max]])
        coeffs = enumerate_ellipsoid(L.basis, math.sqrt(2.0), weights=weights)
        for row in coeffs:
            candidates.add(tuple(int(v) for v in row[:d]))
        r_lo *= 2.0

    if not candidates:
        return []
    ks = np.array(sorted(candidates), dtype=np.int64)
    ks = ks[np.any(ks != 0, axis=1)]
    mask, frac, k_last = resonance_mask(ks, alpha, N, eps)
    ks, frac, k_last = ks[mask], frac[mask], k_last[mask]

    inv = np.linalg.inv(rb.coeffs.astype(float))
    scale = N ** (1.0 / d)
    harmonics = []
    for k, f, kl in zip(ks, frac, k_last):
        full = np.concatenate([k, [kl]]).astype(float)
        m_full = np.rint(inv @ full).astype(np.int64)
        if not np.array_equal(rb.coeffs @ m_full, full.astype(np.int64)):
            raise ReductionError(f"coefficient recovery failed for k={tuple(k)}")
        m, p, sign = split_primitive(m_full)
        X = k / scale
        harmonics.append(ResonantHarmonic(
            k=tuple(int(v) for v in k), k_last=int(kl), m=m, multiplicity=p, sign=sign,
            frac=float(f), X=X, Z=float(N * f), R=float(np.linalg.norm(X)),
        ))
    logger.debug(f"Resonant set: {len(harmonics)} harmonics (N={N}, eps={eps})")
    return harmonics


def resonant_frame(harmonics: List[ResonantHarmonic]) -> pd.DataFrame:
    """CSV rows: k..., k_last, m..., p, X..., Z, R"""
    rows = []
    for h in harmonics:
        row: Dict[str, Any] = {f"k{i + 1}": v for i, v in enumerate(h.k)}
        row["k_last"] = h.k_last
        row.update({f"m{i + 1}": v for i, v in enumerate(h.m.m)})
        row["p"] = h.multiplicity * h.sign
        row.update({f"X{i + 1}": float(v) for i, v in enumerate(h.X)})
        row["Z"] = h.Z
        row["R"] = h.R
        rows.append(row)
    return pd.DataFrame(rows)


# ======================================================================
# HAAR SAMPLING AND EQUIDISTRIBUTION
# ======================================================================

def haar_sample(
    n: int,
    rng: np.random.Generator,
    method: str = "horospherical",
    n_haar: Optional[int] = None,
) -> UnimodularLattice:
    """
    Approximately Haar-distributed unimodular lattice in R^n

    horospherical: L(n_haar, alpha) with alpha uniform on the torus (equidistribution
    of expanding horospheres); siegel_check additionally applies a uniform random
    rotation, which preserves Haar measure.
    """
    if n < 2:
        raise DomainError(f"n must be >= 2, got {n}")
    if n_haar is None:
        n_haar = int(get_config().get('sampling.n_haar', 1_000_000))
    alpha = rng.random(n - 1)
    L = dani_lattice(n_haar, alpha)
    if method == "horospherical":
        return L
    if method == "siegel_check":
        rotation = special_ortho_group.rvs(n, random_state=rng)
        return UnimodularLattice(rotation @ L.basis)
    raise DomainError(f"unknown Haar sampling method: {method}")


def count_in_ball(L: UnimodularLattice, rho: float) -> int:
    """Number of nonzero lattice vectors with |v| <= rho"""
    coeffs = enumerate_ellipsoid(L.basis, rho * (1 + 1e-12))
    if len(coeffs) == 0:
        return 0
    return int(np.sum(np.linalg.norm(L.vectors(coeffs), axis=1) <= rho))


def _siegel_worker(item):
    seed_seq, n, rho, n_haar, method = item
    L = haar_sample(n, stream(seed_seq), method=method, n_haar=n_haar)
    return count_in_ball(L, rho)


def siegel_counts(n: int, rho: float, samples: int, seed: int, n_haar: Optional[int] = None,
                  method: str = "horospherical", max_workers: Optional[int] = None) -> np.ndarray:
    """Per-sample nonzero-vector counts in the radius-rho ball"""
    items = [(s, n, rho, n_haar, method) for s in spawn_seeds(seed, samples)]
    return np.array(parallel_map(_siegel_worker, items, max_workers, desc="siegel"), dtype=float)


# Observables for the equidistribution check: Phi(reduced basis, alpha) -> float

def observable_constant(rb: ReducedBasis, alpha: np.ndarray) -> float:
    return 1.0


def observable_shortest_clipped(rb: ReducedBasis, alpha: np.ndarray) -> float:
    return float(min(rb.lengths[0], 1.0))


def observable_alpha_first(rb: ReducedBasis, alpha: np.ndarray) -> float:
    return float(alpha[0])


OBSERVABLES: Dict[str, Callable[[ReducedBasis, np.ndarray], float]] = {
    "constant": observable_constant,
    "shortest_clipped": observable_shortest_clipped,
    "alpha_first": observable_alpha_first,
}


def _equidistribution_worker(item):
    seed_seq, N, d, observable = item
    alpha = stream(seed_seq).random(d)
    rb = reduced_basis(dani_lattice(N, alpha))
    return observable(rb, alpha), short_vector_flag(rb)


def equidistribution_check(
    N_list: Sequence[int],
    observable: Callable[[ReducedBasis, np.ndarray], float],
    samples: int,
    seed: int,
    d: int = 2,
    max_workers: Optional[int] = None,
) -> pd.DataFrame:
    """
    Monte Carlo mean of Phi(e(L(N, alpha)), alpha) over uniform alpha, per N

    The same alpha streams are reused for every N.
    """
    rows = []
    seeds = spawn_seeds(seed, samples)
    for N in N_list:
        items = [(s, int(N), d, observable) for s in seeds]
        results = parallel_map(_equidistribution_worker, items, max_workers, desc=f"equidistribution N={N}")
        values = np.array([v for v, _ in results], dtype=float)
        flagged = int(sum(f for _, f in results))
        stderr = float(values.std(ddof=1) / math.sqrt(samples)) if samples > 1 else float("nan")
        rows.append({"N": int(N), "mean": float(values.mean()), "stderr": stderr,
                     "samples": samples, "short_vector_flags": flagged})
        if flagged:
            logger.warning(f"N={N}: {flagged} samples with a lattice vector shorter than the short-vector threshold")
    return pd.DataFrame(rows)


# ======================================================================
# SERIALIZATION
# ======================================================================

def lattice_to_json(L: UnimodularLattice) -> Dict[str, Any]:
    """Row-major basis"""
    return {"dim": L.dim, "basis": L.basis.tolist()}


def lattice_from_json(payload: Dict[str, Any]) -> UnimodularLattice:
    return UnimodularLattice(np.asarray(payload["basis"], dtype=float))
