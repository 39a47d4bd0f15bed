"""Shared builders and brute-force oracles for the test suite."""

import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.core.entities import (
    BoundaryPoint,
    BoundaryPointSet,
    FresnelParams,
    ObstacleTrack,
    Point2,
    PointKind,
    RssiTrace,
    Side,
    TemplateParams,
    TrackSample,
)
from src.core.blockage import template_value
from src.core.geometry import ffz_value_array, region_edges, sample_boundary

WAVELENGTH = 0.0574


def pt(x: float, y: float) -> Point2:
    return Point2(x=x, y=y)


def straight_track(start: Tuple[float, float], end: Tuple[float, float], speed: float, width: float,
                   interval: float = 0.05, t0: float = 0.0, track_id: str = "t",
                   with_direction: bool = False) -> ObstacleTrack:
    """Single constant-speed pass from start to end."""
    a, b = np.asarray(start, dtype=float), np.asarray(end, dtype=float)
    length = float(np.hypot(*(b - a)))
    duration = length / speed
    times = np.append(np.arange(0.0, duration, interval), duration)
    if times.size > 2 and times[-1] - times[-2] < 1e-9:
        times = times[:-1]
        times[-1] = duration
    unit = (b - a) / length
    direction = pt(float(unit[0]), float(unit[1])) if with_direction else None
    samples = [
        TrackSample(t=float(t0 + t), center=pt(*(a + speed * t * unit).tolist()), direction=direction)
        for t in times
    ]
    return ObstacleTrack(track_id=track_id, samples=samples, width=width)


def boundary_set(fp: FresnelParams, count: int = 8, phase: float = math.pi / 8,
                 noise: float = 0.0, seed: int = 0) -> BoundaryPointSet:
    """Points on the true boundary, labelled by the sign of y′, paired two per synthetic event."""
    xy, signs = sample_boundary(fp, count, phase)
    if noise > 0.0:
        xy = xy + np.random.default_rng(seed).uniform(-noise, noise, size=xy.shape)
    points = []
    for k, ((x, y), s) in enumerate(zip(xy, signs)):
        points.append(BoundaryPoint(
            position=pt(float(x), float(y)),
            kind=PointKind.START if k % 2 == 0 else PointKind.END,
            event_index=k // 2,
            side=Side.LEFT if s > 0 else Side.RIGHT,
        ))
    return BoundaryPointSet(points=points)


def dip_trace(dips: Sequence[Tuple[float, TemplateParams]], duration: float, interval: float = 0.05,
              baseline: float = -50.0, depth: float = 10.0, noise: float = 0.0, seed: int = 0) -> RssiTrace:
    """Flat trace with template-shaped dips starting at the given times."""
    times = interval * np.arange(int(round(duration / interval)) + 1)
    values = np.full(times.shape, baseline)
    for start, w in dips:
        values += depth * template_value(w, times - start)
    if noise > 0.0:
        values += np.random.default_rng(seed).normal(0.0, noise, size=times.shape)
    return RssiTrace(samples=values.tolist(), sample_interval=interval)


def dense_segment_min(ax, ay, bx, by, fp: FresnelParams, samples: int = 51) -> np.ndarray:
    """Minimum of F over each segment, by evaluating evenly spaced points along it."""
    u = np.linspace(0.0, 1.0, samples)
    ax, ay, bx, by = (np.atleast_1d(np.asarray(v, dtype=float))[:, None] for v in (ax, ay, bx, by))
    xs = ax + (bx - ax) * u
    ys = ay + (by - ay) * u
    return ffz_value_array(xs, ys, fp.d, fp.theta, fp.wavelength).min(axis=1)


def dense_sections(track: ObstacleTrack, fp: FresnelParams, dt: float = 0.001,
                   samples: int = 51) -> List[Tuple[float, float]]:
    """Blockage intervals of a track against a FFZ on a dt grid."""
    times = np.arange(track.start_time, track.end_time + 0.5 * dt, dt)
    times = times[times <= track.end_time]
    plus, minus = region_edges(track, times)
    inside = dense_segment_min(plus[:, 0], plus[:, 1], minus[:, 0], minus[:, 1], fp, samples) <= 1.0
    intervals = []
    start: Optional[float] = times[0] if inside[0] else None
    for k in np.flatnonzero(inside[1:] != inside[:-1]):
        if inside[k + 1]:
            start = times[k + 1]
        else:
            intervals.append((float(start), float(times[k])))
            start = None
    if start is not None:
        intervals.append((float(start), float(times[-1])))
    return intervals


def wrapped_angle_diff(a: float, b: float) -> float:
    return abs((a - b + math.pi) % (2.0 * math.pi) - math.pi)
