"""
Lattice Reduction Primitives
LLL reduction with the integer transform, Fincke-Pohst enumeration inside
ellipsoids, and exact integer determinants
"""

from pathlib import Path
from typing import Optional, Tuple
import math
import sys

import numpy as np

sys.path.append(str(Path(__file__).parent.parent))

from utils.config_loader import get_config
from utils.errors import ReductionError


def gram_schmidt(B: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gram-Schmidt data of the columns of B

    Returns:
        mu: lower-triangular coefficients mu[i, j] = (b_i, b*_j)/|b*_j|^2
        norms2: squared lengths |b*_i|^2
    """
    q, r = np.linalg.qr(B)
    diag = np.diag(r)
    norms2 = diag ** 2
    mu = (r / diag[:, None]).T
    return mu, norms2


def lll_reduce(B: np.ndarray, delta: Optional[float] = None, max_iter: int = 100_000) -> Tuple[np.ndarray, np.ndarray]:
    """
    LLL-reduce the columns of B

    Args:
        B: n x n real basis (columns)
        delta: Lovasz parameter in (1/4, 1); defaults to lattice.lll_delta

    Returns:
        (reduced basis B @ U, unimodular integer matrix U)
    """
    if delta is None:
        delta = float(get_config().get('lattice.lll_delta', 0.75))
    if not 0.25 < delta < 1.0:
        raise ReductionError(f"LLL delta must lie in (1/4, 1), got {delta}")
    B = np.array(B, dtype=float)
    n = B.shape[1]
    U = np.eye(n, dtype=np.int64)
    if n == 1:
        return B, U

    k = 1
    mu, norms2 = gram_schmidt(B)
    for _ in range(max_iter):
        if k >= n:
            break
        # Size reduction of b_k
        for j in range(k - 1, -1, -1):
            q = round(mu[k, j])
            if q != 0:
                B[:, k] -= q * B[:, j]
                U[:, k] -= q * U[:, j]
                mu[k, :j + 1] -= q * mu[j, :j + 1]
        # Lovasz condition
        if norms2[k] >= (delta - mu[k, k - 1] ** 2) * norms2[k - 1]:
            k += 1
        else:
            B[:, [k - 1, k]] = B[:, [k, k - 1]]
            U[:, [k - 1, k]] = U[:, [k, k - 1]]
            mu, norms2 = gram_schmidt(B)
            k = max(k - 1, 1)
    else:
        raise ReductionError("LLL did not converge")

    return B, U


def _fincke_pohst(R: np.ndarray, radius2: float, cap: int) -> np.ndarray:
    """All integer c != 0 with |R c|^2 <= radius2 for upper-triangular R"""
    n = R.shape[0]
    found = []
    count = 0
    c = np.zeros(n, dtype=np.int64)
    slack = 1e-12 * radius2

    def descend(i: int, partial: float):
        nonlocal count
        rii = R[i, i]
        center = -float(R[i, i + 1:] @ c[i + 1:]) / rii
        remaining = radius2 - partial
        if remaining < -slack:
            return
        half = math.sqrt(max(remaining, 0.0) + slack) / abs(rii)
        lo, hi = math.ceil(center - half), math.floor(center + half)
        if i == 0:
            vals = np.arange(lo, hi + 1, dtype=np.int64)
            if vals.size == 0:
                return
            total = partial + (rii * (vals - center)) ** 2
            vals = vals[total <= radius2 + slack]
            count += vals.size
            if count > cap:
                raise ReductionError(f"enumeration exceeded {cap} vectors")
            rows = np.repeat(c[None, :], vals.size, axis=0)
            rows[:, 0] = vals
            found.append(rows)
            return
        for v in range(lo, hi + 1):
            c[i] = v
            descend(i - 1, partial + (rii * (v - center)) ** 2)
        c[i] = 0

    descend(n - 1, 0.0)
    if not found:
        return np.zeros((0, n), dtype=np.int64)
    coeffs = np.concatenate(found, axis=0)
    return coeffs[np.any(coeffs != 0, axis=1)]


def enumerate_ellipsoid(
    basis: np.ndarray,
    radius: float,
    weights: Optional[np.ndarray] = None,
    cap: Optional[int] = None,
    delta: Optional[float] = None,
) -> np.ndarray:
    """
    Integer coefficient vectors c != 0 (w.r.t. basis) with |W basis c| <= radius

    Args:
        basis: n x n lattice basis (columns)
        radius: enumeration radius
        weights: optional per-coordinate weights W (diagonal), turning the ball
            into an axis-aligned ellipsoid
        cap: maximum number of vectors (lattice.enumeration_cap)

    Returns:
        m x n int64 array of coefficient vectors (both signs present)
    """
    if cap is None:
        cap = int(get_config().get('lattice.enumeration_cap', 2_000_000))
    B = np.asarray(basis, dtype=float)
    if weights is not None:
        B = np.asarray(weights, dtype=float)[:, None] * B
    reduced, U = lll_reduce(B, delta=delta)
    _, r = np.linalg.qr(reduced)
    coeffs = _fincke_pohst(r, float(radius) ** 2, cap)
    return coeffs @ U.T


def integer_det(matrix: np.ndarray) -> int:
    """Exact determinant of an integer matrix (fraction-free Bareiss elimination)"""
    a = [[int(v) for v in row] for row in np.asarray(matrix)]
    n = len(a)
    sign, prev = 1, 1
    for k in range(n - 1):
        if a[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if a[i][k] != 0), None)
            if swap is None:
                return 0
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]
