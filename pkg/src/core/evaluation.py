"""
Evaluation metrics: blockage-section confusion durations, boundary-point distance CDF and localization error.
"""

import math
from typing import Dict, List, Sequence, Tuple

import numpy as np

from src.core.entities import BoundaryPointSet, ConfusionDurations, FresnelParams, Point2, SectionSet
from src.core.errors import InputError
from src.core.geometry import boundary_distance

HORIZON_TOLERANCE = 1e-9
DEFAULT_PERCENTILES = (50, 90, 95)


def _overlap(a: Sequence[Tuple[float, float]], b: Sequence[Tuple[float, float]]) -> float:
    """Total length of the intersection of two sorted, disjoint interval lists."""
    i = j = 0
    total = 0.0
    while i < len(a) and j < len(b):
        lo = max(a[i][0], b[j][0])
        hi = min(a[i][1], b[j][1])
        if hi > lo:
            total += hi - lo
        if a[i][1] < b[j][1]:
            i += 1
        else:
            j += 1
    return total


def confusion(detected: SectionSet, truth: SectionSet) -> ConfusionDurations:
    """TP/TN/FP/FN durations; together they partition the shared horizon."""
    if abs(detected.horizon - truth.horizon) > HORIZON_TOLERANCE * max(1.0, truth.horizon):
        raise InputError(f"horizon mismatch: detected {detected.horizon} s vs truth {truth.horizon} s")
    tp = _overlap(detected.intervals, truth.intervals)
    fp = max(detected.total_length - tp, 0.0)
    fn = max(truth.total_length - tp, 0.0)
    tn = max(truth.horizon - tp - fp - fn, 0.0)
    return ConfusionDurations(tp=tp, tn=tn, fp=fp, fn=fn)


def boundary_distance_cdf(P: BoundaryPointSet, truth: FresnelParams) -> List[float]:
    """Sorted distances from each boundary point to the true FFZ boundary."""
    if len(P) == 0:
        raise InputError("boundary distance CDF needs at least one point")
    return sorted(boundary_distance(p.position, truth) for p in P.points)


def distance_percentiles(distances: Sequence[float], percentiles: Sequence[int] = DEFAULT_PERCENTILES) -> Dict[str, float]:
    if not distances:
        return {}
    values = np.percentile(np.asarray(distances, dtype=float), percentiles)
    return {f"p{q}": float(v) for q, v in zip(percentiles, values)}


def localization_error(estimate: Point2, truth: Point2) -> float:
    return math.hypot(estimate.x - truth.x, estimate.y - truth.y)
