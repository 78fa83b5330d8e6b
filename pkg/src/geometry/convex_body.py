"""
Convex Bodies
Strictly convex bodies given by their support function: balls, ellipsoids and
trigonometric perturbations of an ellipse's support function (d=2)
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence, Tuple
import math
import sys

import mpmath as mp
import numpy as np
from scipy import integrate, optimize, special

sys.path.append(str(Path(__file__).parent.parent))

from utils.config_loader import get_config
from utils.errors import DomainError
from utils.logger import get_logger

logger = get_logger(__name__)

KINDS = ("ball", "ellipsoid", "support_perturbation")

_GRID_BAND = 1e-3


def unit_ball_volume(d: int) -> float:
    """Volume of the unit ball in R^d"""
    return float(np.pi ** (d / 2) / special.gamma(d / 2 + 1))


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ConvexBody:
    """
    Strictly convex body C, stored centered at the origin plus a center offset

    The centered shape has support function
        ball / ellipsoid:        P0(t) = sqrt(t' Sigma t)
        support_perturbation:    P0(t) = |t| * (sqrt(u' Sigma u) + sum_j a_j cos(j phi) + b_j sin(j phi))
    where u = t/|t| = (cos phi, sin phi). Bodies are immutable.
    """
    dimension: int
    kind: str
    sigma: np.ndarray
    center: np.ndarray
    harmonics: Tuple[Tuple[int, float, float], ...] = ()
    symmetric: bool = field(init=False)

    def __post_init__(self):
        if self.dimension < 1:
            raise DomainError(f"dimension must be >= 1, got {self.dimension}")
        if self.kind not in KINDS:
            raise DomainError(f"unknown body kind: {self.kind}")

        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        center = np.asarray(self.center, dtype=float).reshape(-1)
        if sigma.shape != (self.dimension, self.dimension):
            raise DomainError(f"shape matrix must be {self.dimension}x{self.dimension}, got {sigma.shape}")
        if center.shape != (self.dimension,):
            raise DomainError(f"center must have {self.dimension} coordinates")
        if not np.allclose(sigma, sigma.T, atol=1e-14):
            raise DomainError("shape matrix must be symmetric")
        try:
            np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError as e:
            raise DomainError("shape matrix must be positive definite") from e

        harmonics = tuple((int(j), float(a), float(b)) for j, a, b in self.harmonics)
        if harmonics and self.kind != "support_perturbation":
            raise DomainError("harmonics are only allowed for support_perturbation bodies")
        if self.kind == "support_perturbation":
            if self.dimension != 2:
                raise DomainError("support perturbations are implemented for d=2 only")
            if any(j < 2 for j, _, _ in harmonics):
                raise DomainError("perturbation harmonics must have order j >= 2")

        object.__setattr__(self, "sigma", _readonly(sigma))
        object.__setattr__(self, "center", _readonly(center))
        object.__setattr__(self, "harmonics", harmonics)
        object.__setattr__(self, "symmetric", all(j % 2 == 0 for j, _, _ in harmonics))
        object.__setattr__(self, "_sigma_inv", np.linalg.inv(sigma))
        object.__setattr__(self, "_det", float(np.linalg.det(sigma)))

        self._certify_convexity()

    # ------------------------------------------------------------------
    # Centered support function and its derivatives
    # ------------------------------------------------------------------

    def _h(self, phi: np.ndarray) -> np.ndarray:
        """Support function on the unit circle (d=2)"""
        u = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        h = np.sqrt(np.einsum("...i,ij,...j->...", u, self.sigma, u))
        for j, a, b in self.harmonics:
            h = h + a * np.cos(j * phi) + b * np.sin(j * phi)
        return h

    def _h_prime(self, phi: np.ndarray) -> np.ndarray:
        u = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        w = np.stack([-np.sin(phi), np.cos(phi)], axis=-1)
        q = np.einsum("...i,ij,...j->...", u, self.sigma, u)
        dq = np.einsum("...i,ij,...j->...", u, self.sigma, w)
        hp = dq / np.sqrt(q)
        for j, a, b in self.harmonics:
            hp = hp + j * (-a * np.sin(j * phi) + b * np.cos(j * phi))
        return hp

    def _radius_of_curvature(self, phi: np.ndarray) -> np.ndarray:
        """h + h'' on the unit circle (d=2)"""
        u = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        q = np.einsum("...i,ij,...j->...", u, self.sigma, u)
        rho = self._det / q ** 1.5
        for j, a, b in self.harmonics:
            rho = rho + (1 - j * j) * (a * np.cos(j * phi) + b * np.sin(j * phi))
        return rho

    def centered_support(self, t: np.ndarray) -> np.ndarray:
        """P0(t) for t of shape (..., d); no zero check"""
        t = np.asarray(t, dtype=float)
        if self.kind == "support_perturbation":
            norm = np.linalg.norm(t, axis=-1)
            phi = np.arctan2(t[..., 1], t[..., 0])
            return norm * self._h(phi)
        return np.sqrt(np.einsum("...i,ij,...j->...", t, self.sigma, t))

    def centered_curvature(self, xi: np.ndarray) -> np.ndarray:
        """Gaussian curvature K at unit normals xi of shape (..., d)"""
        xi = np.asarray(xi, dtype=float)
        if self.dimension == 1:
            return np.ones(xi.shape[:-1])
        if self.kind == "support_perturbation":
            phi = np.arctan2(xi[..., 1], xi[..., 0])
            return 1.0 / self._radius_of_curvature(phi)
        h = np.sqrt(np.einsum("...i,ij,...j->...", xi, self.sigma, xi))
        return h ** (self.dimension + 1) / self._det

    # ------------------------------------------------------------------

    @property
    def radius(self) -> float:
        """Radius of a ball body"""
        if self.kind != "ball":
            raise DomainError("radius is only defined for balls")
        return float(np.sqrt(self.sigma[0, 0]))

    def _normal_grid(self, count: int) -> np.ndarray:
        if self.dimension == 1:
            return np.array([[1.0], [-1.0]])
        if self.dimension == 2:
            phi = np.linspace(0.0, 2 * np.pi, count, endpoint=False)
            return np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        g = np.random.default_rng(0).standard_normal((count, self.dimension))
        return g / np.linalg.norm(g, axis=1, keepdims=True)

    def _certify_convexity(self) -> None:
        config = get_config()
        normals = self._normal_grid(int(config.get('bodies.curvature_grid', 1000)))
        if self.kind == "support_perturbation":
            phi = np.arctan2(normals[:, 1], normals[:, 0])
            rho = self._radius_of_curvature(phi)
            if np.any(rho <= 0) or np.min(1.0 / rho) <= float(config.get('bodies.min_curvature', 1e-3)):
                raise DomainError("perturbation amplitude too large: curvature not certified positive")
            if np.min(self._h(phi)) <= 0:
                raise DomainError("perturbed body does not contain its center")
        else:
            if np.min(self.centered_curvature(normals)) <= 0:
                raise DomainError("body is not strictly convex")

    def circumradius(self) -> float:
        """Upper bound on max |x - center| over the body"""
        if self.kind == "support_perturbation":
            phi = np.linspace(0.0, 2 * np.pi, 4096, endpoint=False)
            return float(np.max(self._h(phi))) * (1 + 1e-6)
        return float(np.sqrt(np.max(np.linalg.eigvalsh(self.sigma))))

    def inradius(self) -> float:
        """Radius of a ball around the center contained in the body"""
        if self.kind == "support_perturbation":
            phi = np.linspace(0.0, 2 * np.pi, 4096, endpoint=False)
            # the grid minimum may overshoot by O(grid^-2)
            return float(np.min(self._h(phi))) * (1 - 1e-4)
        return float(np.sqrt(np.min(np.linalg.eigvalsh(self.sigma))))


# ----------------------------------------------------------------------
# Constructors
# ----------------------------------------------------------------------

def ball(d: int, radius: float = 1.0, center: Optional[Sequence[float]] = None) -> ConvexBody:
    if radius <= 0:
        raise DomainError(f"radius must be positive, got {radius}")
    c = np.zeros(d) if center is None else center
    return ConvexBody(dimension=d, kind="ball", sigma=radius ** 2 * np.eye(d), center=c)


def ellipsoid(sigma: np.ndarray, center: Optional[Sequence[float]] = None) -> ConvexBody:
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    d = sigma.shape[0]
    c = np.zeros(d) if center is None else center
    return ConvexBody(dimension=d, kind="ellipsoid", sigma=sigma, center=c)


def support_perturbation(
    sigma: np.ndarray,
    harmonics: Sequence[Tuple[int, float, float]],
    center: Optional[Sequence[float]] = None,
) -> ConvexBody:
    """Ellipse support function plus sum_j a_j cos(j phi) + b_j sin(j phi)"""
    c = np.zeros(2) if center is None else center
    return ConvexBody(dimension=2, kind="support_perturbation", sigma=sigma, center=c,
                      harmonics=tuple(harmonics))


def scaled(body: ConvexBody, r: float) -> ConvexBody:
    """Homothety of the centered shape by r (the center is kept)"""
    if r <= 0:
        raise DomainError(f"scale must be positive, got {r}")
    return ConvexBody(
        dimension=body.dimension,
        kind=body.kind,
        sigma=body.sigma * r * r,
        center=body.center,
        harmonics=tuple((j, a * r, b * r) for j, a, b in body.harmonics),
    )


def translated(body: ConvexBody, center: Sequence[float]) -> ConvexBody:
    return ConvexBody(dimension=body.dimension, kind=body.kind, sigma=body.sigma,
                      center=np.asarray(center, dtype=float), harmonics=body.harmonics)


def slanted_cylinder_section(alpha: Sequence[float]) -> ConvexBody:
    """
    Ellipsoid C_alpha = {y : (|alpha|^2+1)|y|^2 - (alpha,y)^2 <= |alpha|^2+1}

    The quadratic form divided by |alpha|^2+1 is I - alpha alpha'/(1+|alpha|^2),
    whose inverse is the shape matrix I + alpha alpha'.
    """
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    if not np.all(np.isfinite(alpha)):
        raise DomainError("alpha must be finite")
    sigma = np.eye(alpha.size) + np.outer(alpha, alpha)
    if not np.any(alpha):
        return ball(alpha.size)
    return ellipsoid(sigma)


def section_alpha_bound(r_max: float) -> float:
    """Largest |alpha_i| for which r_max * C_alpha fits in the unit cube (extent along e_i is sqrt(1+alpha_i^2))"""
    if not 0.0 < r_max < 0.5:
        raise DomainError(f"slanted sections need 0 < r < 0.5, got {r_max}")
    return math.sqrt((0.5 / r_max) ** 2 - 1.0)


def draw_section_alpha(
    rng: np.random.Generator,
    d: int,
    r_max: Optional[float] = None,
    draw: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None,
    max_draws: int = 1000,
) -> Tuple[np.ndarray, int]:
    """
    alpha in [0,1)^d conditioned on r_max * C_alpha fitting in the unit cube

    Returns:
        (alpha, number of rejected draws)
    """
    draw = draw or (lambda g, size: g.random(size))
    if r_max is None:
        return draw(rng, d), 0
    bound = section_alpha_bound(r_max)
    for rejected in range(max_draws):
        alpha = draw(rng, d)
        if np.all(np.abs(alpha) < bound):
            return alpha, rejected
    raise DomainError(f"no slanted section fits at scale {r_max} after {max_draws} draws")


# ----------------------------------------------------------------------
# Operations
# ----------------------------------------------------------------------

def support(body: ConvexBody, t: Sequence[float]) -> float:
    """P(t) = sup over the body of (t, x), including the center offset"""
    t = np.asarray(t, dtype=float).reshape(-1)
    if t.shape != (body.dimension,):
        raise DomainError(f"expected a {body.dimension}-vector")
    if not np.any(t):
        raise DomainError("support function needs a nonzero direction")
    return float(body.centered_support(t) + body.center @ t)


def _check_unit(xi: np.ndarray, d: int) -> np.ndarray:
    xi = np.asarray(xi, dtype=float).reshape(-1)
    if xi.shape != (d,) or abs(np.linalg.norm(xi) - 1.0) > 1e-9:
        raise DomainError("normal must be a unit vector")
    return xi


def curvature_at_normal(body: ConvexBody, xi: Sequence[float]) -> float:
    """Gaussian curvature of the boundary at the point with outer normal xi"""
    xi = _check_unit(xi, body.dimension)
    return float(body.centered_curvature(xi))


def curvature_from_support(body: ConvexBody, xi: Sequence[float], step: Optional[float] = None) -> float:
    """
    K(xi) = 1 / det(Hessian of P restricted to the tangent space at xi)

    Second directional derivatives use the fourth-order central stencil; mixed
    terms come from polarization. The step defaults to bodies.fd_step (1e-3):
    stencil error is O(h^4) while rounding error grows like eps / h^2, so steps
    near 1e-5 give only about six correct digits.
    """
    xi = _check_unit(xi, body.dimension)
    if step is None:
        step = float(get_config().get('bodies.fd_step', 1e-3))
    d = body.dimension
    if d == 1:
        return 1.0

    # Orthonormal tangent frame: columns of Q after the first
    q, _ = np.linalg.qr(np.column_stack([xi, np.eye(d)]))
    frame = q[:, 1:d]

    def second(direction):
        f = lambda s: float(body.centered_support(xi + s * direction))
        h = step
        return (-f(2 * h) + 16 * f(h) - 30 * f(0.0) + 16 * f(-h) - f(-2 * h)) / (12 * h * h)

    n = d - 1
    hess = np.empty((n, n))
    for i in range(n):
        hess[i, i] = second(frame[:, i])
    for i in range(n):
        for j in range(i + 1, n):
            plus = second(frame[:, i] + frame[:, j])
            minus = second(frame[:, i] - frame[:, j])
            hess[i, j] = hess[j, i] = (plus - minus) / 4.0
    return float(1.0 / np.linalg.det(hess))


def boundary_point(body: ConvexBody, xi: Sequence[float]) -> np.ndarray:
    """The boundary point x(xi) with outer normal xi (gradient of P)"""
    xi = _check_unit(xi, body.dimension)
    if body.kind == "support_perturbation":
        phi = float(np.arctan2(xi[1], xi[0]))
        u = np.array([np.cos(phi), np.sin(phi)])
        w = np.array([-np.sin(phi), np.cos(phi)])
        return body._h(phi) * u + body._h_prime(phi) * w + body.center
    return body.sigma @ xi / np.sqrt(xi @ body.sigma @ xi) + body.center


def volume(body: ConvexBody) -> float:
    """d-volume of the body"""
    d = body.dimension
    if body.kind in ("ball", "ellipsoid"):
        return unit_ball_volume(d) * float(np.sqrt(body._det))

    # Area = 1/2 * integral of h (h + h'') over the circle
    integrand = lambda phi: 0.5 * float(body._h(phi) * body._radius_of_curvature(phi))
    value, err = integrate.quad(integrand, 0.0, 2 * np.pi, epsabs=0.0, epsrel=1e-12, limit=400)
    logger.debug(f"Perturbed body area {value:.12f} (quadrature error {err:.2e})")
    return float(value)


def scaled_volume(body: ConvexBody, r: float) -> float:
    return volume(body) * r ** body.dimension


def gauge(body: ConvexBody, r: float, y: np.ndarray, refine: bool = True) -> np.ndarray:
    """
    Minkowski gauge of r*C0 at displacements y (shape (..., d)) from the center

    Ellipsoids use the quadratic form. Perturbed bodies use the polar
    representation gauge(y) = sup_xi (xi, y) / P0(xi), maximized over a normal grid
    and refined locally with a bounded scalar search near the boundary.
    """
    if r <= 0:
        raise DomainError(f"scale must be positive, got {r}")
    y = np.asarray(y, dtype=float)
    if body.kind in ("ball", "ellipsoid"):
        return np.sqrt(np.einsum("...i,ij,...j->...", y, body._sigma_inv, y)) / r

    flat = y.reshape(-1, 2)
    phi = np.linspace(0.0, 2 * np.pi, int(get_config().get('bodies.membership_grid', 1024)), endpoint=False)
    u = np.stack([np.cos(phi), np.sin(phi)], axis=0)
    inv_h = 1.0 / body._h(phi)
    dphi = phi[1] - phi[0]

    out = np.empty(flat.shape[0])
    for start in range(0, flat.shape[0], 4096):
        block = flat[start:start + 4096]
        ratios = (block @ u) * inv_h
        best = np.argmax(ratios, axis=1)
        values = ratios[np.arange(block.shape[0]), best] / r

        if refine:
            near = np.nonzero(np.abs(values - 1.0) < _GRID_BAND)[0]
            for i in near:
                p = block[i]
                f = lambda s: -(p[0] * np.cos(s) + p[1] * np.sin(s)) / body._h(s)
                c = phi[best[i]]
                res = optimize.minimize_scalar(f, bounds=(c - dphi, c + dphi), method="bounded",
                                               options={"xatol": 1e-12})
                values[i] = max(values[i], -res.fun / r)
        out[start:start + block.shape[0]] = values
    return out.reshape(y.shape[:-1])


def gauge_precise(body: ConvexBody, r: float, y: Sequence, digits: int = 50) -> float:
    """Gauge at one displacement given as mpmath numbers (extended precision)"""
    if body.kind in ("ball", "ellipsoid"):
        with mp.workdps(digits):
            inv = mp.matrix(body._sigma_inv.tolist())
            vec = mp.matrix([mp.mpf(v) for v in y])
            q = (vec.T * inv * vec)[0, 0]
            return float(mp.sqrt(q) / mp.mpf(r))
    # Perturbed bodies: the displacement is exact, the gauge search is double precision
    return float(gauge(body, r, np.array([float(v) for v in y]))[()])


def contains(body: ConvexBody, r: float, x: Sequence[float]) -> bool:
    """True iff x lies in the closed body r*C0 + center"""
    x = np.asarray(x, dtype=float).reshape(-1)
    return bool(gauge(body, r, x - body.center) <= 1.0)


def fits_unit_cube(body: ConvexBody, r: float) -> bool:
    """r*C0 + center fits in the unit cube around the center (nearest-image membership is exact)"""
    eye = np.eye(body.dimension)
    extents = r * np.concatenate([body.centered_support(eye), body.centered_support(-eye)])
    return bool(np.all(extents < 0.5))


# ----------------------------------------------------------------------
# Serialization
# ----------------------------------------------------------------------

def body_to_dict(body: ConvexBody) -> Dict[str, Any]:
    """JSON descriptor {kind, d, params, center}"""
    params: Dict[str, Any] = {}
    if body.kind == "ball":
        params["radius"] = body.radius
    else:
        params["sigma"] = body.sigma.tolist()
    if body.harmonics:
        params["harmonics"] = [list(h) for h in body.harmonics]
    return {"kind": body.kind, "d": body.dimension, "params": params,
            "center": body.center.tolist()}


def body_from_dict(payload: Dict[str, Any]) -> ConvexBody:
    try:
        kind = payload["kind"]
        d = int(payload["d"])
        params = payload.get("params", {})
        center = payload.get("center", [0.0] * d)
    except (KeyError, TypeError, ValueError) as e:
        raise DomainError(f"invalid body descriptor: {e}") from e

    if kind == "ball":
        return ball(d, float(params.get("radius", 1.0)), center)
    if kind == "ellipsoid":
        return ellipsoid(np.asarray(params["sigma"], dtype=float), center)
    if kind == "support_perturbation":
        harmonics = [tuple(h) for h in params.get("harmonics", [])]
        return support_perturbation(np.asarray(params["sigma"], dtype=float), harmonics, center)
    raise DomainError(f"unknown body kind: {kind}")
