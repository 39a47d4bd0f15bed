"""End-to-end tests of the localization pipeline on simulated rooms."""

import math
import time

import numpy as np
import pytest

from src.adapters.simulator import reference_room_channel, reference_room_config, reference_room_scenario, synth_rssi
from src.core.entities import BlockageEvent, ChannelConfig, PipelineConfig, RssiTrace
from src.core.errors import InputError, PipelineStageError
from src.core.use_cases import (
    crop_trace,
    estimate_position,
    process_pair,
    run_pipeline_sync,
    select_tracks,
    unblocked_mean_power,
)

CHANNEL = reference_room_channel(noise_sigma=0.5).model_copy(update={"shadowing_sigma": 0.5})


@pytest.fixture
def small_report(small_scenario):
    return run_pipeline_sync(small_scenario, reference_room_config(), CHANNEL)


# ─────────────────────────────────────────────
# Helpers
# ─────────────────────────────────────────────
def test_crop_trace_keeps_inner_samples():
    trace = RssiTrace(samples=list(np.arange(10.0)), sample_interval=0.5, start_time=1.0)
    cropped = crop_trace(trace, 2.0, 3.5)
    assert cropped.start_time == pytest.approx(2.0)
    assert cropped.samples == [2.0, 3.0, 4.0, 5.0]


def test_crop_trace_needs_two_samples():
    trace = RssiTrace(samples=[0.0, 1.0, 2.0], sample_interval=1.0)
    with pytest.raises(InputError):
        crop_trace(trace, 5.0, 6.0)


def test_select_tracks(small_scenario):
    assert [t.track_id for t in select_tracks(small_scenario.tracks, ["line2", "line4"])] == ["line2", "line4"]
    assert len(select_tracks(small_scenario.tracks, None)) == 5
    with pytest.raises(InputError):
        select_tracks(small_scenario.tracks, ["line9"])


def test_unblocked_mean_power_skips_events():
    trace = RssiTrace(samples=[-50.0] * 10 + [-60.0] * 5 + [-50.0] * 5, sample_interval=1.0)
    event = BlockageEvent(t_start=10.0, t_end=14.0, correlation=0.9, template_index=1)
    assert unblocked_mean_power(trace, [event]) == pytest.approx(-50.0)
    assert unblocked_mean_power(trace, []) == pytest.approx(-52.5)


# ─────────────────────────────────────────────
# Full runs
# ─────────────────────────────────────────────
def test_small_room_localizes_every_pair(small_report):
    assert [(p.anchor_id, p.tx_id) for p in small_report.pairs] == [("A", "TD1"), ("B", "TD1"), ("C", "TD1")]
    for pair in small_report.pairs:
        assert pair.status == "ok"
        assert len(pair.events) >= 5
        assert pair.error < 1.5
        assert pair.section_accuracy > 0.8
    assert small_report.mean_error < 1.0
    assert small_report.mean_error_by_tx["TD1"] == pytest.approx(small_report.mean_error)


def test_small_room_reports_triangulation(small_report):
    (baseline,) = small_report.baselines
    assert baseline.anchors_used == ["A", "B", "C"]
    assert math.isfinite(baseline.error)


def test_run_is_independent_of_concurrency(small_scenario):
    serial = run_pipeline_sync(small_scenario, reference_room_config().model_copy(update={"max_concurrency": 1}), CHANNEL)
    parallel = run_pipeline_sync(small_scenario, reference_room_config().model_copy(update={"max_concurrency": 3}), CHANNEL)
    assert serial == parallel


def test_recorded_traces_replace_simulation(small_scenario):
    traces = {(a.id, "TD1"): synth_rssi(small_scenario, a.id, "TD1", CHANNEL) for a in small_scenario.anchors}
    recorded = run_pipeline_sync(small_scenario, reference_room_config(), traces=traces)
    simulated = run_pipeline_sync(small_scenario, reference_room_config(), CHANNEL)
    assert recorded.pairs == simulated.pairs


def test_missing_recorded_trace_names_the_pair(small_scenario):
    traces = {(a, "TD1"): synth_rssi(small_scenario, a, "TD1", CHANNEL) for a in ("A", "B")}
    with pytest.raises(PipelineStageError) as info:
        run_pipeline_sync(small_scenario, reference_room_config(), traces=traces)
    assert info.value.stage == "prepare"
    assert info.value.pair == "C/TD1"


def test_line_beyond_transmitters_gives_insufficient_events():
    scenario = reference_room_scenario(round_trips=1)
    report = run_pipeline_sync(scenario, reference_room_config(), ChannelConfig(noise_sigma=0.0), track_ids=["line6"], pairs=[("A", "TD1")])
    (pair,) = report.pairs
    assert pair.status == "insufficient_events"
    assert pair.estimate is None and pair.error is None
    assert report.mean_error is None
    assert report.baselines == []


def test_max_events_truncates_the_observation(small_scenario):
    trace = synth_rssi(small_scenario, "B", "TD1", CHANNEL)
    outcome = process_pair(small_scenario, "B", "TD1", trace, reference_room_config(), small_scenario.tracks, max_events=2)
    assert len(outcome.report.events) == 2
    assert outcome.report.boundary_point_count == 4
    assert outcome.trace.end_time == pytest.approx(outcome.report.events[-1].t_end, abs=trace.sample_interval)
    assert outcome.report.status == "ok"


def test_detection_failure_is_reported_as_stage_error(small_scenario):
    short = RssiTrace(samples=[-50.0, -51.0, -50.0], sample_interval=0.05)
    with pytest.raises(PipelineStageError) as info:
        estimate_position(small_scenario.anchor("A"), short, small_scenario.tracks, small_scenario.wavelength,
                          PipelineConfig(), pair="A/TD1")
    assert info.value.stage == "detect"
    assert isinstance(info.value.cause, InputError)


# ─────────────────────────────────────────────
# Reference room (seed sweeps)
# ─────────────────────────────────────────────
ROOM_SEEDS = range(10)


def _room_run(seed, **kwargs):
    return run_pipeline_sync(reference_room_scenario(seed=seed), reference_room_config(), reference_room_channel(), **kwargs)


def _errors(report):
    return [p.error if p.status == "ok" else math.inf for p in report.pairs]


@pytest.fixture(scope="module")
def room_sweep():
    runs = []
    for seed in ROOM_SEEDS:
        started = time.perf_counter()
        report = _room_run(seed)
        runs.append((report, time.perf_counter() - started))
    return runs


@pytest.mark.slow
def test_reference_room_median_error_per_pair(room_sweep):
    by_pair = {}
    for report, _ in room_sweep:
        assert len(report.pairs) == 6
        for pair, error in zip(report.pairs, _errors(report)):
            by_pair.setdefault((pair.anchor_id, pair.tx_id), []).append(error)
    for pair, errors in by_pair.items():
        assert np.median(errors) < 1.0, pair
    passing = sum(max(_errors(report)) < 1.0 for report, _ in room_sweep)
    assert passing >= 8


@pytest.mark.slow
def test_reference_room_section_accuracy(room_sweep):
    for report, _ in room_sweep:
        assert report.section_accuracy >= 0.90


@pytest.mark.slow
def test_reference_room_runtime_per_seed(room_sweep):
    assert max(elapsed for _, elapsed in room_sweep) < 60.0


@pytest.mark.slow
def test_reference_room_triangulation(room_sweep):
    report, _ = room_sweep[0]
    assert len(report.baselines) == 2
    for baseline in report.baselines:
        assert baseline.error < 2.0


@pytest.mark.slow
def test_single_event_on_the_middle_line():
    errors = []
    for seed in ROOM_SEEDS:
        report = _room_run(seed, track_ids=["line3"], max_events=1)
        assert all(len(p.events) == 1 for p in report.pairs)
        errors.extend(_errors(report))
    assert np.median(errors) < 1.0


@pytest.mark.slow
def test_line_nearest_the_anchors_is_least_accurate():
    near, far = [], []
    for seed in ROOM_SEEDS:
        near.extend(e for e in _errors(_room_run(seed, track_ids=["line1"])) if math.isfinite(e))
        far.extend(e for e in _errors(_room_run(seed, track_ids=["line5"])) if math.isfinite(e))
    assert far
    assert np.mean(near) > np.mean(far)
