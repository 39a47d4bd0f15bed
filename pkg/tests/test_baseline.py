"""Tests for path-loss inversion and least-squares trilateration."""

import logging
import math

import numpy as np
import pytest

from src.core.baseline import invert_path_loss, path_loss_power, trilaterate
from src.core.entities import AnchorReading, PathLossModel
from src.core.errors import InputError
from tests.helpers import pt

MODEL = PathLossModel(exponent=2.0, ref_power=-40.0)
CORNERS = [(0.0, 0.0), (4.0, 0.0), (0.0, 4.0)]


def _readings(target, anchors=CORNERS, model=MODEL, noise=None):
    readings = []
    for k, (x, y) in enumerate(anchors):
        power = path_loss_power(math.hypot(target[0] - x, target[1] - y), model)
        if noise is not None:
            power += noise[k]
        readings.append(AnchorReading(anchor_position=pt(x, y), mean_power=power, anchor_id=f"a{k}"))
    return readings


# ─────────────────────────────────────────────
# Path loss
# ─────────────────────────────────────────────
@pytest.mark.parametrize("power, distance", [(-40.0, 1.0), (-60.0, 10.0), (-46.0206, 2.0)])
def test_invert_path_loss_examples(power, distance):
    assert invert_path_loss(power, MODEL) == pytest.approx(distance, abs=1e-4)


@pytest.mark.parametrize("distance", [0.3, 1.0, 2.5, 7.0])
def test_path_loss_round_trip(distance):
    model = PathLossModel(exponent=2.7, ref_power=-35.0)
    assert invert_path_loss(path_loss_power(distance, model), model) == pytest.approx(distance, rel=1e-9)


# ─────────────────────────────────────────────
# trilaterate
# ─────────────────────────────────────────────
def test_trilaterate_exact_ranges():
    p = trilaterate(_readings((1.0, 1.0)))
    assert (p.x, p.y) == pytest.approx((1.0, 1.0), abs=1e-3)


def test_trilaterate_target_on_an_anchor():
    # zero range is out of the path-loss model's reach; 1 mm stands in for it
    p = trilaterate(_readings((0.001, 0.0)))
    assert math.hypot(p.x, p.y) < 1e-2


def test_trilaterate_is_order_independent():
    readings = _readings((1.3, 2.1), noise=[0.4, -0.3, 0.2])
    a = trilaterate(readings)
    b = trilaterate(list(reversed(readings)))
    assert (a.x, a.y) == (b.x, b.y)


def test_biased_reading_still_solves():
    p = trilaterate(_readings((1.0, 1.0), noise=[1.0, 0.0, 0.0]))
    error = math.hypot(p.x - 1.0, p.y - 1.0)
    assert 0.0 < error < 1.0


def test_trilaterate_needs_three_anchors():
    with pytest.raises(InputError):
        trilaterate(_readings((1.0, 1.0))[:2])


def test_collinear_anchors_warn_and_prefer_the_upper_mirror(caplog):
    anchors = [(1.0, 0.4), (3.0, 0.4), (5.0, 0.4)]
    with caplog.at_level(logging.WARNING):
        p = trilaterate(_readings((2.0, 5.4), anchors=anchors))
    assert "collinear" in caplog.text
    assert (p.x, p.y) == pytest.approx((2.0, 5.4), abs=1e-3)


def test_one_db_noise_error_band():
    rng = np.random.default_rng(0)
    errors = []
    for _ in range(20):
        p = trilaterate(_readings((2.5, 3.0), noise=rng.normal(0.0, 1.0, 3)))
        errors.append(math.hypot(p.x - 2.5, p.y - 3.0))
    assert 0.1 <= float(np.median(errors)) <= 2.0
