"""
FFZ geometry: ellipse evaluation, containment, the two split curves, obstacle regions and their edge points,
segment/ellipse intersection and point-to-boundary distance.

Everything here works in the anchor-relative frame (anchor at the origin, transmitter at d·(cos θ, sin θ)).
The scalar functions take entity models; the *_array variants are the numpy kernels the fitter and the
simulator evaluate in bulk.
"""

import math
from typing import Tuple, Union

import numpy as np
from scipy.optimize import minimize_scalar

from src.core.entities import (
    AnchorPose,
    FresnelParams,
    ObstacleTrack,
    Point2,
    Segment2,
    Side,
    TrackSample,
)
from src.core.errors import DomainError, OutOfBandError, RangeError

ArrayLike = Union[float, np.ndarray]
PointLike = Union[Point2, Tuple[float, float]]

BOUNDARY_TOLERANCE = 1e-9
DISTANCE_RESTARTS = 3
DISTANCE_COARSE_SAMPLES = 72


def _require_finite(*values: ArrayLike) -> None:
    for value in values:
        if not np.all(np.isfinite(value)):
            raise DomainError("geometry input must be finite")


def local_coords(x: ArrayLike, y: ArrayLike, theta: float) -> Tuple[ArrayLike, ArrayLike]:
    """Rotate into the link frame: x′ along the anchor→transmitter axis, y′ positive on the left."""
    c, s = math.cos(theta), math.sin(theta)
    return x * c + y * s, y * c - x * s


# ─────────────────────────────────────────────
# Ellipse evaluation
# ─────────────────────────────────────────────
def ffz_value_array(x: ArrayLike, y: ArrayLike, d: ArrayLike, theta: float, wavelength: float) -> np.ndarray:
    """F(x, y, d, θ) broadcast over numpy inputs."""
    xp, yp = local_coords(np.asarray(x, dtype=float), np.asarray(y, dtype=float), theta)
    return (4.0 * xp - 2.0 * d) ** 2 / (2.0 * d + wavelength) ** 2 \
        + 16.0 * yp ** 2 / (wavelength * (4.0 * d + wavelength))


def _xy(p: PointLike) -> Tuple[float, float]:
    if isinstance(p, Point2):
        return p.x, p.y
    x, y = p
    return float(x), float(y)


def ffz_value(p: PointLike, fp: FresnelParams) -> float:
    """F = 1 on the FFZ boundary, F < 1 strictly inside.

    Point2 already refuses non-finite coordinates when it is built (a pydantic ValidationError); raw (x, y)
    pairs and unvalidated models are checked here and raise DomainError.
    """
    x, y = _xy(p)
    _require_finite(x, y, fp.d, fp.theta, fp.wavelength)
    return float(ffz_value_array(x, y, fp.d, fp.theta, fp.wavelength))


def ffz_contains(p: PointLike, fp: FresnelParams) -> bool:
    return ffz_value(p, fp) <= 1.0


def curve_root_argument(x: ArrayLike, y: ArrayLike, d: ArrayLike, theta: float, wavelength: float) -> np.ndarray:
    """(2d + λ)² − (4x′ − 2d)²; negative beyond the major-axis extent."""
    xp, _ = local_coords(np.asarray(x, dtype=float), np.asarray(y, dtype=float), theta)
    return (2.0 * d + wavelength) ** 2 - (4.0 * xp - 2.0 * d) ** 2


def curve_residual_array(x: ArrayLike, y: ArrayLike, d: ArrayLike, theta: float, wavelength: float,
                         side: Side) -> Tuple[np.ndarray, np.ndarray]:
    """Split-curve residuals F_r / F_l and a mask of points inside the square-root band."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xp, yp = local_coords(x, y, theta)
    ratio_sq = (4.0 * xp - 2.0 * d) ** 2 / (2.0 * d + wavelength) ** 2
    in_band = ratio_sq <= 1.0
    half_width = np.sqrt(wavelength * (4.0 * d + wavelength)) / 4.0 * np.sqrt(np.clip(1.0 - ratio_sq, 0.0, None))
    sign = 1.0 if side == Side.RIGHT else -1.0
    return yp + sign * half_width, in_band


def curve_residual(p: Point2, fp: FresnelParams, side: Side) -> float:
    """F_r (side=right, carries +√) or F_l (side=left, carries −√); zero on that half of the boundary."""
    if side == Side.UNASSIGNED:
        raise DomainError("curve residual needs a left or right side")
    _require_finite(p.x, p.y)
    if curve_root_argument(p.x, p.y, fp.d, fp.theta, fp.wavelength) < 0.0:
        raise OutOfBandError(f"({p.x}, {p.y}) lies beyond the major-axis extent of the FFZ")
    residual, _ = curve_residual_array(p.x, p.y, fp.d, fp.theta, fp.wavelength, side)
    return float(residual)


def sample_boundary(fp: FresnelParams, count: int, phase: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
    """Points on the F = 1 locus at evenly spaced ellipse parameters, with their y′ sign (+1 left, −1 right)."""
    phi = phase + np.arange(count) * (2.0 * math.pi / count)
    xp = 0.5 * fp.d + fp.semi_major * np.cos(phi)
    yp = fp.semi_minor * np.sin(phi)
    c, s = math.cos(fp.theta), math.sin(fp.theta)
    points = np.column_stack([xp * c - yp * s, xp * s + yp * c])
    return points, np.sign(yp)


# ─────────────────────────────────────────────
# Obstacle regions
# ─────────────────────────────────────────────
def track_state(track: ObstacleTrack, times: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    """Interpolated centre p^cnt(t) and unit direction n(t) at each time, shape (n, 2)."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    _require_finite(times)
    span = track.times
    slack = 1e-9 * max(1.0, abs(span[-1]))
    if np.any(times < span[0] - slack) or np.any(times > span[-1] + slack):
        raise RangeError(f"time outside track {track.track_id} span [{span[0]}, {span[-1]}]")
    idx = np.clip(np.searchsorted(span, times, side="right") - 1, 0, len(span) - 2)
    frac = np.clip((times - span[idx]) / (span[idx + 1] - span[idx]), 0.0, 1.0)[:, None]

    centers = track.centers
    center = centers[idx] + frac * (centers[idx + 1] - centers[idx])

    chord = track.chord_directions[idx]
    if track.directions is None:
        direction = chord
    else:
        dirs = track.directions
        blended = dirs[idx] + frac * (dirs[idx + 1] - dirs[idx])
        norms = np.linalg.norm(blended, axis=1, keepdims=True)
        # antiparallel samples (turnarounds) blend through zero; use the chord there
        direction = np.where(norms > 1e-9, blended / np.where(norms > 1e-9, norms, 1.0), chord)
    if np.any(~np.isfinite(direction)) and track.width > 0:
        raise DomainError(f"track {track.track_id} never moves; its direction is undefined")
    return center, np.nan_to_num(direction)


def region_edges(track: ObstacleTrack, times: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    """Edge points e⁺ = p^cnt + (w/2)n and e⁻ = p^cnt − (w/2)n, shape (n, 2) each."""
    center, direction = track_state(track, times)
    half = 0.5 * track.width * direction
    return center + half, center - half


def obstacle_region(track: ObstacleTrack, t: float) -> Segment2:
    """The thin-board obstacle region O(t) as the segment from e⁺ to e⁻."""
    plus, minus = region_edges(track, t)
    return Segment2(a=Point2(x=plus[0, 0], y=plus[0, 1]), b=Point2(x=minus[0, 0], y=minus[0, 1]))


# ─────────────────────────────────────────────
# Intersection and distance
# ─────────────────────────────────────────────
def segment_min_ffz_value(ax: ArrayLike, ay: ArrayLike, bx: ArrayLike, by: ArrayLike,
                          fp: FresnelParams) -> np.ndarray:
    """Minimum of F over each segment a→b.

    F restricted to a(1−u) + b·u is a convex quadratic in u, so the minimum over [0, 1] sits at the
    clipped vertex.
    """
    d, lam = fp.d, fp.wavelength
    alpha = (2.0 * d + lam) ** 2
    beta = lam * (4.0 * d + lam)
    xa, ya = local_coords(np.asarray(ax, dtype=float), np.asarray(ay, dtype=float), fp.theta)
    xb, yb = local_coords(np.asarray(bx, dtype=float), np.asarray(by, dtype=float), fp.theta)
    p0, q = 4.0 * xa - 2.0 * d, 4.0 * (xb - xa)
    r0, r1 = 4.0 * ya, 4.0 * (yb - ya)
    quad = q ** 2 / alpha + r1 ** 2 / beta
    lin = 2.0 * p0 * q / alpha + 2.0 * r0 * r1 / beta
    const = p0 ** 2 / alpha + r0 ** 2 / beta
    safe = np.where(quad > 0, quad, 1.0)
    u = np.where(quad > 0, np.clip(-lin / (2.0 * safe), 0.0, 1.0), 0.0)
    return quad * u ** 2 + lin * u + const


def segment_intersects_ffz(s: Segment2, fp: FresnelParams) -> bool:
    value = segment_min_ffz_value(s.a.x, s.a.y, s.b.x, s.b.y, fp)
    return bool(value <= 1.0 + BOUNDARY_TOLERANCE)


def boundary_distance(p: Point2, fp: FresnelParams) -> float:
    """Euclidean distance from p to the nearest point of the F = 1 locus.

    Golden-section search over the ellipse parameter, restarted from the best coarse local minima.
    """
    _require_finite(p.x, p.y)
    a, b = fp.semi_major, fp.semi_minor
    xp, yp = local_coords(p.x, p.y, fp.theta)
    u0, v0 = xp - 0.5 * fp.d, yp

    def sq_dist(phi: float) -> float:
        return (a * math.cos(phi) - u0) ** 2 + (b * math.sin(phi) - v0) ** 2

    step = 2.0 * math.pi / DISTANCE_COARSE_SAMPLES
    grid = np.arange(DISTANCE_COARSE_SAMPLES) * step
    coarse = (a * np.cos(grid) - u0) ** 2 + (b * np.sin(grid) - v0) ** 2
    is_min = (coarse <= np.roll(coarse, 1)) & (coarse <= np.roll(coarse, -1))
    starts = np.flatnonzero(is_min)
    starts = starts[np.argsort(coarse[starts], kind="stable")][:DISTANCE_RESTARTS]

    best = float(coarse.min())
    for k in starts:
        lo, mid, hi = grid[k] - step, grid[k], grid[k] + step
        try:
            res = minimize_scalar(sq_dist, bracket=(lo, mid, hi), method="golden", tol=1e-12)
        except ValueError:
            # flat triple (ties on the coarse grid) is not a strict bracket
            res = minimize_scalar(sq_dist, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        best = min(best, float(res.fun))
    return math.sqrt(max(best, 0.0))


# ─────────────────────────────────────────────
# Frames
# ─────────────────────────────────────────────
def to_anchor_frame(p: Point2, pose: AnchorPose) -> Point2:
    x, y = local_coords(p.x - pose.position.x, p.y - pose.position.y, pose.rotation)
    return Point2(x=float(x), y=float(y))


def to_world_frame(p: Point2, pose: AnchorPose) -> Point2:
    c, s = math.cos(pose.rotation), math.sin(pose.rotation)
    return Point2(x=pose.position.x + p.x * c - p.y * s, y=pose.position.y + p.x * s + p.y * c)


def link_params(pose: AnchorPose, transmitter: Point2, wavelength: float) -> FresnelParams:
    """Ground-truth FFZ of the link between an anchor and a transmitter position, in the anchor frame."""
    rel = to_anchor_frame(transmitter, pose)
    d = rel.norm()
    if d <= 0.0:
        raise DomainError("transmitter coincides with the anchor")
    return FresnelParams(d=d, theta=math.atan2(rel.y, rel.x), wavelength=wavelength)


def track_in_frame(track: ObstacleTrack, pose: AnchorPose) -> ObstacleTrack:
    """Re-express a world-frame track in an anchor frame."""
    samples = []
    for sample in track.samples:
        direction = None
        if sample.direction is not None:
            dx, dy = local_coords(sample.direction.x, sample.direction.y, pose.rotation)
            norm = math.hypot(dx, dy)
            direction = Point2(x=dx / norm, y=dy / norm)
        samples.append(TrackSample(t=sample.t, center=to_anchor_frame(sample.center, pose), direction=direction))
    return ObstacleTrack(track_id=track.track_id, samples=samples, width=track.width)
