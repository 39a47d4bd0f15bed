"""Tests for the per-axis camera calibration."""

from pathlib import Path

import numpy as np
import pytest

from src.adapters.calibration import calibrate_track, fit_calibration
from src.adapters.files import read_calibration_pairs
from src.core.entities import CalibrationModel
from src.core.errors import InputError
from tests.helpers import pt, straight_track

DATA = Path(__file__).resolve().parent.parent / "data"


def _grid_points():
    return [(x, y) for x in (0.5, 2.0, 3.5, 5.0) for y in (0.5, 2.0, 3.5, 5.0)]


def test_aligned_pairs_give_identity():
    model = fit_calibration([(pt(x, y), pt(x, y)) for x, y in _grid_points()])
    assert (model.scale_x, model.offset_x, model.scale_y, model.offset_y) == pytest.approx((1.0, 0.0, 1.0, 0.0), abs=1e-12)


def test_scaled_and_offset_raw_positions():
    pairs = [(pt(2 * x + 1, 2 * y + 1), pt(x, y)) for x, y in _grid_points()]
    model = fit_calibration(pairs)
    assert (model.scale_x, model.offset_x) == pytest.approx((0.5, -0.5))
    assert (model.scale_y, model.offset_y) == pytest.approx((0.5, -0.5))


def test_constant_raw_axis_is_rejected():
    with pytest.raises(InputError):
        fit_calibration([(pt(1.0, y), pt(1.0, y)) for y in (0.0, 1.0, 2.0)])


def test_needs_two_pairs():
    with pytest.raises(InputError):
        fit_calibration([(pt(1.0, 1.0), pt(1.0, 1.0))])


def test_residual_does_not_exceed_injected_noise():
    rng = np.random.default_rng(4)
    raw = np.array(_grid_points())
    noise = rng.normal(0.0, 0.02, raw.shape)
    true = 0.97 * raw + 0.1 + noise
    model = fit_calibration([(pt(*r), pt(*t)) for r, t in zip(raw.tolist(), true.tolist())])
    mapped = np.array([[model.scale_x * x + model.offset_x, model.scale_y * y + model.offset_y] for x, y in raw])
    residual_rms = np.sqrt(np.mean((mapped - true) ** 2, axis=0))
    noise_rms = np.sqrt(np.mean(noise ** 2, axis=0))
    assert np.all(residual_rms <= 1.2 * noise_rms)


def test_reference_pairs_file():
    model = fit_calibration(read_calibration_pairs(DATA / "calibration_pairs.csv"))
    assert model.scale_x == pytest.approx(1 / 0.98, abs=0.01)
    assert model.scale_y == pytest.approx(1 / 1.03, abs=0.01)


def test_calibrate_track_maps_centres():
    track = straight_track((1.0, 1.0), (3.0, 1.0), speed=0.5, width=0.9, with_direction=True)
    model = CalibrationModel(scale_x=2.0, offset_x=1.0, scale_y=1.0, offset_y=-0.5)
    calibrated = calibrate_track(track, model)
    np.testing.assert_allclose(calibrated.centers[:, 0], 2.0 * track.centers[:, 0] + 1.0)
    np.testing.assert_allclose(calibrated.centers[:, 1], track.centers[:, 1] - 0.5)
    np.testing.assert_allclose(calibrated.directions, [[1.0, 0.0]] * len(track.samples))
    assert calibrated.width == track.width
