"""
RSSI triangulation baseline.

Each anchor's mean received power is turned into a range with the log-distance path-loss model
r = −10·n·log10(d) + A, and the transmitter position is the nonlinear least-squares solution of
Σ (‖pos − anchor_i‖ − d_i)², started from every pairwise circle intersection.
"""

import itertools
import math
from typing import List, Sequence

import numpy as np
from scipy.optimize import least_squares

from src.core.entities import AnchorReading, PathLossModel, Point2
from src.core.errors import InputError

from utils.logging_setup import get_logger
logger = get_logger(__name__, log_file="core.log")

COLLINEAR_TOLERANCE = 1e-9
COST_TIE_TOLERANCE = 1e-10


def invert_path_loss(r: float, model: PathLossModel) -> float:
    """d = 10^((A − r)/(10n))."""
    return float(10.0 ** ((model.ref_power - r) / (10.0 * model.exponent)))


def path_loss_power(d: float, model: PathLossModel) -> float:
    """Forward model r = −10·n·log10(d) + A."""
    return float(model.ref_power - 10.0 * model.exponent * math.log10(d))


def _circle_intersections(c1: np.ndarray, r1: float, c2: np.ndarray, r2: float) -> List[np.ndarray]:
    """Intersections of two range circles; the closest-approach point on the centre line when they miss."""
    delta = c2 - c1
    dist = float(np.hypot(*delta))
    if dist == 0.0:
        return []
    unit = delta / dist
    a = (r1 ** 2 - r2 ** 2 + dist ** 2) / (2.0 * dist)
    h_sq = r1 ** 2 - a ** 2
    base = c1 + a * unit
    if h_sq <= 0.0:
        return [base]
    h = math.sqrt(h_sq)
    normal = np.array([-unit[1], unit[0]])
    return [base + h * normal, base - h * normal]


def _is_collinear(anchors: np.ndarray) -> bool:
    centred = anchors - anchors.mean(axis=0)
    sv = np.linalg.svd(centred, compute_uv=False)
    return sv[0] == 0.0 or sv[-1] / sv[0] < COLLINEAR_TOLERANCE


def trilaterate(readings: Sequence[AnchorReading], model: PathLossModel = PathLossModel()) -> Point2:
    """Least-squares position from three or more anchor readings; independent of reading order."""
    if len(readings) < 3:
        raise InputError(f"triangulation needs at least 3 anchor readings, got {len(readings)}")
    ordered = sorted(readings, key=lambda r: (r.anchor_position.x, r.anchor_position.y, r.mean_power))
    anchors = np.array([[r.anchor_position.x, r.anchor_position.y] for r in ordered])
    ranges = np.array([invert_path_loss(r.mean_power, model) for r in ordered])
    if _is_collinear(anchors):
        logger.warning("⚠️ Anchors are collinear, the triangulated position is ambiguous")

    def residuals(pos: np.ndarray) -> np.ndarray:
        return np.hypot(*(pos[None, :] - anchors).T) - ranges

    def jacobian(pos: np.ndarray) -> np.ndarray:
        diff = pos[None, :] - anchors
        norms = np.hypot(*diff.T)[:, None]
        return np.where(norms > 0.0, diff / np.where(norms > 0.0, norms, 1.0), 0.0)

    starts = [anchors.mean(axis=0)]
    for i, j in itertools.combinations(range(len(anchors)), 2):
        starts.extend(_circle_intersections(anchors[i], ranges[i], anchors[j], ranges[j]))

    best_pos, best_cost = None, math.inf
    for x0 in starts:
        result = least_squares(residuals, x0, jac=jacobian, xtol=1e-12, ftol=1e-12, gtol=1e-12)
        # mirror solutions of collinear anchors tie; the earlier start keeps the tie
        if best_pos is None or result.cost < best_cost - COST_TIE_TOLERANCE * max(1.0, best_cost):
            best_pos, best_cost = result.x, float(result.cost)
    logger.debug(f"trilateration: {len(starts)} starts, best cost {best_cost:.3e}")
    return Point2(x=float(best_pos[0]), y=float(best_pos[1]))
