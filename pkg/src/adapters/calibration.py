"""
Camera position calibration.

Raw camera-derived positions are mapped to world metres with an independent affine fit per axis
(ordinary least squares of true on raw), estimated from reference points placed around the room.
"""

from typing import Sequence, Tuple

import numpy as np
from scipy.stats import linregress

from src.core.entities import CalibrationModel, ObstacleTrack, Point2, TrackSample
from src.core.errors import InputError

from utils.logging_setup import get_logger
logger = get_logger(__name__, log_file="adapters.log")


def _axis_fit(raw: np.ndarray, true: np.ndarray, axis: str) -> Tuple[float, float]:
    if np.ptp(raw) == 0.0:
        raise InputError(f"raw {axis} coordinates are constant; the {axis} scale is undetermined")
    fit = linregress(raw, true)
    return float(fit.slope), float(fit.intercept)


def fit_calibration(pairs: Sequence[Tuple[Point2, Point2]]) -> CalibrationModel:
    """Per-axis least-squares affine map from raw camera positions to true positions."""
    if len(pairs) < 2:
        raise InputError(f"calibration needs at least 2 point pairs, got {len(pairs)}")
    raw = np.array([[r.x, r.y] for r, _ in pairs], dtype=float)
    true = np.array([[t.x, t.y] for _, t in pairs], dtype=float)
    scale_x, offset_x = _axis_fit(raw[:, 0], true[:, 0], "x")
    scale_y, offset_y = _axis_fit(raw[:, 1], true[:, 1], "y")
    model = CalibrationModel(scale_x=scale_x, offset_x=offset_x, scale_y=scale_y, offset_y=offset_y)

    mapped = np.array([[p.x, p.y] for p in (model.apply(r) for r, _ in pairs)])
    rms = float(np.sqrt(np.mean(np.sum((mapped - true) ** 2, axis=1))))
    logger.info(f"🎯 Calibration from {len(pairs)} pairs: x = {scale_x:.4f}·raw + {offset_x:.4f}, "
                f"y = {scale_y:.4f}·raw + {offset_y:.4f} (residual RMS {rms:.4f} m)")
    return model


def calibrate_track(track: ObstacleTrack, model: CalibrationModel) -> ObstacleTrack:
    """Apply a calibration to every centre; explicit directions are rescaled per axis and renormalized."""
    samples = []
    for sample in track.samples:
        direction = None
        if sample.direction is not None:
            dx, dy = model.scale_x * sample.direction.x, model.scale_y * sample.direction.y
            norm = float(np.hypot(dx, dy))
            direction = Point2(x=dx / norm, y=dy / norm)
        samples.append(TrackSample(t=sample.t, center=model.apply(sample.center), direction=direction))
    return ObstacleTrack(track_id=track.track_id, samples=samples, width=track.width)
