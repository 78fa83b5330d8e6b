"""
Linear Flows
Occupation times of toral linear flows in convex bodies, lattice points in
slanted capsules, and geodesic ball times
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple, Any
import math
import sys

import numpy as np
import pandas as pd
from scipy import optimize

sys.path.append(str(Path(__file__).parent.parent))

from geometry.convex_body import (
    ConvexBody, ball, body_from_dict, body_to_dict, gauge, scaled_volume,
    slanted_cylinder_section, unit_ball_volume,
)
from utils.errors import DomainError, UnsupportedDimensionError
from utils.logger import get_logger
from utils.parallel import parallel_map
from utils.rng import spawn_seeds, stream

logger = get_logger(__name__)

WALK_SPACING = 0.5


@dataclass(frozen=True, eq=False)
class FlowOrbitSpec:
    """Flow line x + t v, 0 <= t <= T, and the body r C0 + center"""
    body: ConvexBody
    r: float
    v: np.ndarray
    x: np.ndarray
    T: float

    def __post_init__(self):
        d = self.body.dimension
        v = np.atleast_1d(np.asarray(self.v, dtype=float))
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        if v.shape != (d,) or x.shape != (d,):
            raise DomainError(f"v and x must be {d}-vectors")
        if not np.linalg.norm(v) > 0:
            raise DomainError("flow direction must be nonzero")
        if self.T < 0:
            raise DomainError(f"T must be >= 0, got {self.T}")
        if self.r <= 0:
            raise DomainError(f"scale must be positive, got {self.r}")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "x", x)

    @property
    def d(self) -> int:
        return self.body.dimension

    @property
    def speed(self) -> float:
        return float(np.linalg.norm(self.v))


# ======================================================================
# CANDIDATE TRANSLATES
# ======================================================================

def segment_neighbors(start: np.ndarray, direction: np.ndarray, T: float, radius: float,
                      budget: int = 1 << 20) -> np.ndarray:
    """
    Integer points within radius of the segment start + t direction, t in [0, T],
    possibly with some extra points farther away

    The segment is walked with spatial spacing WALK_SPACING; every point of it lies
    within WALK_SPACING/2 of a walk point.
    """
    start = np.asarray(start, dtype=float)
    direction = np.asarray(direction, dtype=float)
    speed = float(np.linalg.norm(direction))
    steps = int(math.ceil(T * speed / WALK_SPACING)) if T > 0 else 0
    times = np.linspace(0.0, T, steps + 1) if steps else np.array([0.0, T])

    reach = radius + WALK_SPACING / 2
    K = int(math.ceil(reach)) + 1
    n = start.size
    stencil = np.stack(np.meshgrid(*([np.arange(-K, K + 1)] * n), indexing="ij"), axis=-1).reshape(-1, n)
    block = max(1, budget // stencil.shape[0])

    found = []
    for lo in range(0, times.size, block):
        walk = start + times[lo:lo + block, None] * direction
        cand = np.floor(walk).astype(np.int64)[:, None, :] + stencil[None, :, :]
        dist = np.linalg.norm(walk[:, None, :] - cand, axis=2)
        found.append(np.unique(cand[dist <= reach], axis=0))
    if not found:
        return np.zeros((0, n), dtype=np.int64)
    return np.unique(np.concatenate(found, axis=0), axis=0)


# ======================================================================
# OCCUPATION TIME
# ======================================================================

def _ellipsoid_intervals(body: ConvexBody, r: float, w: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Entry/exit times of w + t v in r C0 for rows w (quadratic about the closest approach)"""
    A = body._sigma_inv
    a = float(v @ A @ v)
    t_c = -(w @ A @ v) / a
    w_c = w + t_c[:, None] * v
    gap = r * r - np.einsum("ij,jk,ik->i", w_c, A, w_c)
    hit = gap > 0
    half = np.sqrt(np.where(hit, gap, 0.0) / a)
    return np.column_stack([t_c - half, t_c + half])[hit]


def _perturbed_interval(body: ConvexBody, r: float, w: np.ndarray, v: np.ndarray) -> Optional[Tuple[float, float]]:
    """Time interval of w + t v inside r C0 for a perturbed body, by bracketing and brentq"""
    speed2 = float(v @ v)
    outer = r * body.circumradius()
    t_c = -float(w @ v) / speed2
    dist2 = float(w @ w) - t_c * t_c * speed2
    if dist2 >= outer * outer:
        return None
    span = math.sqrt(outer * outer - dist2) / math.sqrt(speed2)
    step = r * body.inradius() / (2 * math.sqrt(speed2))
    grid = np.arange(t_c - span, t_c + span + step, step)

    f = lambda t: float(gauge(body, r, w + t * v)) - 1.0
    values = gauge(body, r, w[None, :] + grid[:, None] * v) - 1.0
    inside = np.nonzero(values <= 0)[0]
    if inside.size == 0:
        return None
    i, j = int(inside[0]), int(inside[-1])
    enter = grid[i] if i == 0 else optimize.brentq(f, grid[i - 1], grid[i], xtol=1e-12)
    leave = grid[j] if j == grid.size - 1 else optimize.brentq(f, grid[j], grid[j + 1], xtol=1e-12)
    return float(enter), float(leave)


def flow_time_in_body(spec: FlowOrbitSpec) -> float:
    """
    Time the flow line spends in the periodized body sum_j chi(. - j) over [0, T]

    Overlapping translates are counted with multiplicity.
    """
    if spec.T == 0:
        return 0.0
    body, r = spec.body, spec.r
    outer = r * body.circumradius()
    start = spec.x - body.center
    translates = segment_neighbors(start, spec.v, spec.T, outer)
    if translates.size == 0:
        return 0.0
    w = start - translates

    if body.kind in ("ball", "ellipsoid"):
        intervals = _ellipsoid_intervals(body, r, w, spec.v)
    else:
        found = [_perturbed_interval(body, r, row, spec.v) for row in w]
        intervals = np.array([iv for iv in found if iv is not None]).reshape(-1, 2)
    clipped = np.clip(intervals, 0.0, spec.T)
    return float(np.sum(clipped[:, 1] - clipped[:, 0]))


def periodized_multiplicity(body: ConvexBody, r: float, points: np.ndarray) -> np.ndarray:
    """Number of integer translates of r C0 + center containing each point"""
    disp = np.mod(points - body.center + 0.5, 1.0) - 0.5
    K = int(math.ceil(r * body.circumradius() + 0.5))
    d = body.dimension
    offsets = np.stack(np.meshgrid(*([np.arange(-K, K + 1)] * d), indexing="ij"), axis=-1).reshape(-1, d)
    total = np.zeros(points.shape[0], dtype=np.int64)
    for j in offsets:
        total += gauge(body, r, disp - j, refine=False) <= 1.0
    return total


def flow_time_riemann(spec: FlowOrbitSpec, relative_step: float = 1e-6, block: int = 1 << 18) -> float:
    """Midpoint-rule occupation time (oracle)"""
    if spec.T == 0:
        return 0.0
    count = int(math.ceil(1.0 / relative_step))
    h = spec.T / count
    total = 0
    for lo in range(0, count, block):
        t = (np.arange(lo, min(lo + block, count)) + 0.5) * h
        total += int(np.sum(periodized_multiplicity(spec.body, spec.r, spec.x + t[:, None] * spec.v)))
    return total * h


def flow_discrepancy(spec: FlowOrbitSpec) -> float:
    """Occupation time minus T Vol(r C)"""
    if spec.d == 3:
        raise UnsupportedDimensionError("flow discrepancy is not available for d=3")
    return flow_time_in_body(spec) - spec.T * scaled_volume(spec.body, spec.r)


def flow_normalization(d: int, r: float, T: float) -> float:
    """1 for d=2; r^{(d-1)/2} T^{(d-3)/(2(d-1))} for d >= 4"""
    if d == 2:
        return 1.0
    if d < 4:
        raise UnsupportedDimensionError(f"flow normalization is defined for d=2 and d>=4, got d={d}")
    return r ** ((d - 1) / 2.0) * T ** ((d - 3) / (2.0 * (d - 1)))


def normalized_flow_discrepancy(spec: FlowOrbitSpec) -> float:
    norm = flow_normalization(spec.d, spec.r, spec.T)
    if spec.T == 0:
        return 0.0
    return flow_discrepancy(spec) / norm


# ======================================================================
# CAPSULES (SLANTED CYLINDERS)
# ======================================================================

def _check_segment(y: Sequence[float], v: Sequence[float], r: float, T: float) -> Tuple[np.ndarray, np.ndarray]:
    y = np.atleast_1d(np.asarray(y, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if y.shape != v.shape or y.size < 2:
        raise DomainError("y and v must be vectors of the same dimension >= 2")
    if r <= 0 or T < 0:
        raise DomainError(f"need r > 0 and T >= 0, got r={r}, T={T}")
    if not np.linalg.norm(v) > 0:
        raise DomainError("cylinder direction must be nonzero")
    return y, v


def _inside_cylinder(points: np.ndarray, y: np.ndarray, v: np.ndarray, r: float, T: float, caps: bool) -> np.ndarray:
    rel = points - y
    speed2 = float(v @ v)
    t = rel @ v / speed2
    if caps:
        t = np.clip(t, 0.0, T)
        dist2 = np.sum((rel - t[:, None] * v) ** 2, axis=1)
        return dist2 <= r * r
    dist2 = np.sum((rel - t[:, None] * v) ** 2, axis=1)
    last = points[:, -1]
    return (dist2 <= r * r) & (last >= 0) & (last <= T)


def capsule_volume(n: int, r: float, length: float) -> float:
    """Volume of the points within r of a segment of the given length in R^n"""
    return unit_ball_volume(n - 1) * r ** (n - 1) * length + unit_ball_volume(n) * r ** n


def cylinder_volume(y: np.ndarray, v: np.ndarray, r: float, T: float, caps: bool = True) -> float:
    n = y.size
    speed = float(np.linalg.norm(v))
    if caps:
        return capsule_volume(n, r, T * speed)
    if v[-1] == 0:
        raise DomainError("slab-clipped cylinder needs a nonzero last direction coordinate")
    return unit_ball_volume(n - 1) * r ** (n - 1) * T * speed / abs(float(v[-1]))


def cylinder_count(y: Sequence[float], v: Sequence[float], r: float, T: float,
                   caps: bool = True) -> Tuple[int, float]:
    """
    Integer points within distance r of the segment y + t v, 0 <= t <= T

    caps=False counts the infinite cylinder clipped to 0 <= z_last <= T instead.

    Returns:
        (count, count - exact volume)
    """
    y, v = _check_segment(y, v, r, T)
    volume = cylinder_volume(y, v, r, T, caps)
    if caps:
        candidates = segment_neighbors(y, v, T, r)
    else:
        s_lo, s_hi = -y[-1] / v[-1], (T - y[-1]) / v[-1]
        lo, hi = min(s_lo, s_hi), max(s_lo, s_hi)
        candidates = segment_neighbors(y + lo * v, v, hi - lo, r * math.sqrt(1 + (v[:-1] @ v[:-1]) / v[-1] ** 2))
    if candidates.size == 0:
        return 0, -volume
    count = int(np.sum(_inside_cylinder(candidates.astype(float), y, v, r, T, caps)))
    return count, count - volume


def cylinder_count_bruteforce(y: Sequence[float], v: Sequence[float], r: float, T: float,
                              caps: bool = True) -> int:
    """Scan of the bounding box of the capsule (oracle)"""
    y, v = _check_segment(y, v, r, T)
    if caps:
        ends = np.stack([y, y + T * v])
        widen = r
    else:
        if v[-1] == 0:
            raise DomainError("slab-clipped cylinder needs a nonzero last direction coordinate")
        ends = np.stack([y + (s - y[-1]) / v[-1] * v for s in (0.0, T)])
        widen = r * float(np.linalg.norm(v)) / abs(float(v[-1]))
    lo = np.floor(ends.min(axis=0) - widen).astype(np.int64)
    hi = np.ceil(ends.max(axis=0) + widen).astype(np.int64)
    if not caps:
        lo[-1], hi[-1] = 0, int(math.floor(T))
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, y.size).astype(float)
    return int(np.sum(_inside_cylinder(grid, y, v, r, T, caps)))


def slab_ellipsoid_count(x: Sequence[float], alpha: Sequence[float], r: float, T: float) -> int:
    """
    sum over n = 0..floor(T) of the number of integer translates of r C_alpha
    containing x + n alpha

    Equals cylinder_count((x, 0), (alpha, 1), r, T, caps=False).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    if T < 0:
        raise DomainError(f"T must be >= 0, got {T}")
    body = slanted_cylinder_section(alpha)
    n = np.arange(0, int(math.floor(T)) + 1, dtype=float)
    points = x + n[:, None] * alpha
    return int(np.sum(periodized_multiplicity(body, r, points)))


# ======================================================================
# GEODESIC BALL TIMES
# ======================================================================

@dataclass(frozen=True)
class GeodesicTime:
    time: float
    raw: float
    normalized: float


def geodesic_normalization(d: int, r: float, speed: float, T: float) -> float:
    """Multiplier |v|^{(d+1)/(2(d-1))} / (r^{(d-1)/2} T^{(d-3)/(2(d-1))}); 1 below d=4"""
    if d < 4:
        return 1.0
    return speed ** ((d + 1) / (2.0 * (d - 1))) / (r ** ((d - 1) / 2.0) * T ** ((d - 3) / (2.0 * (d - 1))))


def geodesic_ball_time(r: float, v: Sequence[float], x: Sequence[float], y: Sequence[float], T: float) -> GeodesicTime:
    """Time the geodesic x + t v spends in the ball B(y, r) of the flat torus"""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    d = y.size
    if d == 3:
        raise UnsupportedDimensionError("geodesic ball times are not available for d=3")
    if not 0 < r < math.sqrt(d) / 2:
        raise DomainError(f"radius must lie in (0, sqrt(d)/2), got {r}")
    spec = FlowOrbitSpec(body=ball(d, 1.0, center=y), r=r, v=v, x=x, T=T)
    time = flow_time_in_body(spec)
    raw = time - scaled_volume(spec.body, r) * T
    normalized = raw * geodesic_normalization(d, r, spec.speed, T) if T > 0 else 0.0
    return GeodesicTime(time=time, raw=raw, normalized=normalized)


# ======================================================================
# SAMPLERS
# ======================================================================

def parse_box_density(density: str) -> Tuple[float, float]:
    """'box:lo,hi' -> (lo, hi): each velocity coordinate uniform on [lo, hi]"""
    try:
        kind, params = density.split(":", 1)
        lo, hi = (float(v) for v in params.split(","))
    except (AttributeError, ValueError) as e:
        raise DomainError(f"invalid direction density: {density!r}") from e
    if kind != "box" or not lo < hi:
        raise DomainError(f"invalid direction density: {density!r}")
    return lo, hi


def _draw_velocity(rng: np.random.Generator, d: int, box: Tuple[float, float]) -> np.ndarray:
    lo, hi = box
    while True:
        v = lo + (hi - lo) * rng.random(d)
        if np.linalg.norm(v) > 0:
            return v


def _flow_worker(item) -> Dict[str, Any]:
    seed_seq, sample_id, job = item
    rng = stream(seed_seq)
    d, a, b = job["d"], job["a"], job["b"]
    r = a + (b - a) * float(rng.random())
    x = rng.random(d)
    v = np.asarray(job["v"], dtype=float) if job["v"] is not None else _draw_velocity(rng, d, job["box"])
    spec = FlowOrbitSpec(body=body_from_dict(job["body"]), r=r, v=v, x=x, T=job["T"])
    raw = flow_discrepancy(spec)
    row: Dict[str, Any] = {"sample_id": sample_id, "r": r}
    row.update({f"v{i + 1}": float(c) for i, c in enumerate(v)})
    row.update({f"x{i + 1}": float(c) for i, c in enumerate(x)})
    row["raw_discrepancy"] = raw
    row["normalized"] = raw / flow_normalization(d, r, spec.T)
    return row


def sample_flow_discrepancy(
    body: ConvexBody,
    a: float,
    b: float,
    T: float,
    samples: int,
    seed: int,
    v: Optional[Sequence[float]] = None,
    density: str = "box:0,1",
    max_workers: Optional[int] = None,
) -> pd.DataFrame:
    """Flow discrepancies at uniform (r, x) and fixed or box-distributed v"""
    d = body.dimension
    flow_normalization(d, 1.0, 1.0)
    job = {"d": d, "a": a, "b": b, "T": float(T), "body": body_to_dict(body),
           "v": None if v is None else [float(c) for c in v],
           "box": parse_box_density(density) if v is None else None}
    logger.info(f"Sampling {samples} flow discrepancies (d={d}, T={T}, body={body.kind})")
    items = [(s, i, job) for i, s in enumerate(spawn_seeds(seed, samples))]
    return pd.DataFrame(parallel_map(_flow_worker, items, max_workers, desc="flow samples"))


def _geodesic_worker(item) -> Dict[str, Any]:
    seed_seq, sample_id, job = item
    rng = stream(seed_seq)
    d, a, b = job["d"], job["a"], job["b"]
    r = a + (b - a) * float(rng.random())
    x = rng.random(d)
    v = _draw_velocity(rng, d, job["box"])
    result = geodesic_ball_time(r, v, x, job["y"], job["T"])
    row: Dict[str, Any] = {"sample_id": sample_id, "r": r}
    row.update({f"v{i + 1}": float(c) for i, c in enumerate(v)})
    row.update({f"x{i + 1}": float(c) for i, c in enumerate(x)})
    row["raw_discrepancy"] = result.raw
    row["normalized"] = result.normalized
    return row


def sample_geodesic(
    d: int,
    a: float,
    b: float,
    T: float,
    samples: int,
    seed: int,
    density: str = "box:0.5,1.5",
    y: Optional[Sequence[float]] = None,
    max_workers: Optional[int] = None,
) -> pd.DataFrame:
    """Normalized geodesic ball times at uniform (r, x) and box-distributed v"""
    if d == 3:
        raise UnsupportedDimensionError("geodesic ball times are not available for d=3")
    center = [0.5] * d if y is None else [float(c) for c in y]
    job = {"d": d, "a": a, "b": b, "T": float(T), "y": center, "box": parse_box_density(density)}
    logger.info(f"Sampling {samples} geodesic ball times (d={d}, T={T}, density={density})")
    items = [(s, i, job) for i, s in enumerate(spawn_seeds(seed, samples))]
    return pd.DataFrame(parallel_map(_geodesic_worker, items, max_workers, desc="geodesic samples"))
