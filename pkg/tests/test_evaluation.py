"""Tests for section confusion durations, boundary-distance CDFs and localization error."""

import math

import numpy as np
import pytest

from src.core.entities import BoundaryPoint, BoundaryPointSet, ConfusionDurations, PointKind, SectionSet, Side
from src.core.errors import InputError
from src.core.evaluation import boundary_distance_cdf, confusion, distance_percentiles, localization_error
from tests.helpers import boundary_set, pt


def _sections(intervals, horizon=100.0):
    return SectionSet(intervals=intervals, horizon=horizon)


# ─────────────────────────────────────────────
# SectionSet
# ─────────────────────────────────────────────
def test_section_set_clips_and_merges():
    sections = _sections([(5.0, 8.0), (-2.0, 1.0), (7.0, 9.0), (95.0, 120.0), (30.0, 30.0)])
    assert sections.intervals == [(0.0, 1.0), (5.0, 9.0), (95.0, 100.0)]
    assert sections.total_length == pytest.approx(10.0)


# ─────────────────────────────────────────────
# confusion
# ─────────────────────────────────────────────
def test_perfect_detection():
    truth = _sections([(10.0, 20.0), (50.0, 55.0)])
    c = confusion(truth, truth)
    assert (c.tp, c.tn, c.fp, c.fn) == pytest.approx((15.0, 85.0, 0.0, 0.0))


def test_nothing_detected():
    c = confusion(_sections([]), _sections([(10.0, 20.0)]))
    assert (c.tp, c.tn, c.fp, c.fn) == pytest.approx((0.0, 90.0, 0.0, 10.0))


def test_partial_overlap():
    c = confusion(_sections([(12.0, 22.0)]), _sections([(10.0, 20.0)]))
    assert (c.tp, c.tn, c.fp, c.fn) == pytest.approx((8.0, 88.0, 2.0, 2.0))
    assert c.accuracy(100.0) == pytest.approx(0.96)


def test_reference_ratios():
    ratios = ConfusionDurations(tp=99.0, tn=547.0, fp=19.0, fn=43.0).ratios(713.0)
    assert ratios["tp"] == pytest.approx(0.139, abs=0.001)
    assert ratios["tn"] == pytest.approx(0.767, abs=0.001)
    assert ratios["fp"] == pytest.approx(0.027, abs=0.001)
    assert ratios["fn"] == pytest.approx(0.060, abs=0.001)


def test_horizon_mismatch_is_rejected():
    with pytest.raises(InputError):
        confusion(_sections([], horizon=50.0), _sections([], horizon=60.0))


def _random_sections(rng, horizon):
    starts = np.sort(rng.uniform(0.0, horizon, int(rng.integers(0, 8))))
    return _sections([(s, s + rng.uniform(0.1, 6.0)) for s in starts], horizon)


def test_durations_partition_horizon_and_swap_symmetrically():
    rng = np.random.default_rng(12)
    for _ in range(200):
        a, b = _random_sections(rng, 60.0), _random_sections(rng, 60.0)
        c = confusion(a, b)
        assert c.total == pytest.approx(60.0)
        swapped = confusion(b, a)
        assert (swapped.tp, swapped.tn) == pytest.approx((c.tp, c.tn))
        assert (swapped.fp, swapped.fn) == pytest.approx((c.fn, c.fp))


def test_overlap_matches_dense_grid():
    rng = np.random.default_rng(13)
    grid = np.arange(0.0, 60.0, 0.001) + 0.0005
    for _ in range(20):
        a, b = _random_sections(rng, 60.0), _random_sections(rng, 60.0)

        def mask(sections):
            m = np.zeros(grid.shape, dtype=bool)
            for s, e in sections.intervals:
                m |= (grid >= s) & (grid < e)
            return m

        assert confusion(a, b).tp == pytest.approx(np.sum(mask(a) & mask(b)) * 0.001, abs=0.05)


# ─────────────────────────────────────────────
# Boundary distances
# ─────────────────────────────────────────────
def test_points_on_truth_have_zero_distance(tilted_link):
    distances = boundary_distance_cdf(boundary_set(tilted_link, count=10), tilted_link)
    assert len(distances) == 10
    assert max(distances) < 1e-6


def test_cdf_is_sorted_and_contains_offsets(link):
    points = [
        BoundaryPoint(position=pt(4.515, 0.0), kind=PointKind.START, event_index=0, side=Side.LEFT),
        BoundaryPoint(position=pt(2.0, link.semi_minor + 0.1), kind=PointKind.END, event_index=0, side=Side.RIGHT),
    ]
    distances = boundary_distance_cdf(BoundaryPointSet(points=points), link)
    assert distances == sorted(distances)
    assert distances == pytest.approx([0.1, 0.5], abs=1e-6)


def test_cdf_needs_points(link):
    with pytest.raises(InputError):
        boundary_distance_cdf(BoundaryPointSet(), link)


def test_distance_percentiles():
    summary = distance_percentiles([float(k) for k in range(101)])
    assert summary == pytest.approx({"p50": 50.0, "p90": 90.0, "p95": 95.0})
    assert distance_percentiles([]) == {}


# ─────────────────────────────────────────────
# localization_error
# ─────────────────────────────────────────────
def test_localization_error_examples():
    assert localization_error(pt(2.0, 5.4), pt(2.0, 5.4)) == 0.0
    assert localization_error(pt(0.0, 0.0), pt(3.0, 4.0)) == pytest.approx(5.0)
    assert localization_error(pt(1.0, 1.0), pt(2.0, 2.0)) == pytest.approx(math.sqrt(2.0))
