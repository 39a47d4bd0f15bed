"""
This module contains the core use case logic of SARR-LOC: running the localization pipeline end to end.

For every (anchor, transmitter) pair the run_pipeline function:
1. obtains the anchor's RSSI trace (recorded, or synthesized from the scenario)
2. detects blockage events with the multi-template detector
3. turns each event into two side-labelled FFZ boundary points using the obstacle tracks in the anchor frame
4. fits the Fresnel ellipse and converts (d*, θ*) to a world position
5. evaluates the result against the scenario geometry (localization error, section confusion, boundary CDF)

Pairs run concurrently in worker threads and are reported in pair order. The RSSI triangulation baseline is
computed per transmitter from the same traces. Any stage failure is re-raised as PipelineStageError naming
the stage and the pair.
"""

import asyncio
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple, TypeVar

import numpy as np

from src.adapters.simulator import scenario_truth_sections, synth_rssi, truth_section_set
from src.core.blockage import detect_multi, event_sections
from src.core.baseline import trilaterate
from src.core.boundary import collect_boundary_points
from src.core.entities import (
    AnchorPose,
    AnchorReading,
    BaselineReport,
    BlockageEvent,
    BoundaryPointSet,
    ChannelConfig,
    FitResult,
    ObstacleTrack,
    PairReport,
    PipelineConfig,
    Point2,
    RssiTrace,
    RunReport,
    Scenario,
)
from src.core.errors import InputError, PipelineStageError
from src.core.evaluation import boundary_distance_cdf, confusion, distance_percentiles, localization_error
from src.core.fitting import fit, localize
from src.core.geometry import link_params, track_in_frame

from utils.logging_setup import get_logger
logger = get_logger(__name__, log_file="core.log")

T = TypeVar("T")
PairKey = Tuple[str, str]


class PairEstimate(NamedTuple):
    events: List[BlockageEvent]
    points: BoundaryPointSet
    fit: Optional[FitResult]
    estimate: Optional[Point2]


class PairOutcome(NamedTuple):
    report: PairReport
    trace: RssiTrace


def _stage(stage: str, pair: Optional[str], fn: Callable[..., T], *args, **kwargs) -> T:
    try:
        return fn(*args, **kwargs)
    except PipelineStageError:
        raise
    except Exception as e:
        logger.error(f"❌ Stage '{stage}' failed for {pair}: {e}", exc_info=True)
        raise PipelineStageError(stage, pair, e) from e


def crop_trace(trace: RssiTrace, t_begin: float, t_end: float) -> RssiTrace:
    """Samples of the trace inside [t_begin, t_end]."""
    slack = 1e-9 * max(1.0, abs(t_end))
    keep = np.flatnonzero((trace.times >= t_begin - slack) & (trace.times <= t_end + slack))
    if keep.size < 2:
        raise InputError(f"trace has fewer than 2 samples in [{t_begin:.3f}, {t_end:.3f}] s")
    return RssiTrace(samples=trace.values[keep].tolist(), sample_interval=trace.sample_interval,
                     start_time=float(trace.times[keep[0]]))


def select_tracks(tracks: Sequence[ObstacleTrack], track_ids: Optional[Sequence[str]]) -> List[ObstacleTrack]:
    if not track_ids:
        return list(tracks)
    chosen = [t for t in tracks if t.track_id in set(track_ids)]
    unknown = set(track_ids) - {t.track_id for t in chosen}
    if unknown:
        raise InputError(f"unknown track ids {sorted(unknown)}")
    return chosen


def estimate_position(anchor: AnchorPose, trace: RssiTrace, tracks: Sequence[ObstacleTrack], wavelength: float,
                      config: PipelineConfig = PipelineConfig(), max_events: Optional[int] = None,
                      pair: Optional[str] = None) -> PairEstimate:
    """Detection, boundary estimation and fitting for one anchor; no fit when events are insufficient."""
    events = _stage("detect", pair, detect_multi, trace, config.detection)
    if max_events is not None:
        events = events[:max_events]
    local_tracks = [track_in_frame(t, anchor) for t in tracks]
    points = _stage("boundary", pair, collect_boundary_points, local_tracks, events)
    if len(events) < config.min_events or len(points) < 2:
        logger.warning(f"⚠️ {pair or anchor.id}: {len(events)} events, {len(points)} boundary points; not enough to localize")
        return PairEstimate(events, points, None, None)
    result = _stage("fit", pair, fit, points, wavelength, config.grid, config.method)
    estimate = localize(anchor, result)
    return PairEstimate(events, points, result, estimate)


def process_pair(scenario: Scenario, anchor_id: str, tx_id: str, trace: RssiTrace, config: PipelineConfig,
                 tracks: Sequence[ObstacleTrack], max_events: Optional[int] = None) -> PairOutcome:
    """Estimate one pair and evaluate it against the scenario geometry."""
    pair = f"{anchor_id}/{tx_id}"
    anchor = scenario.anchor(anchor_id)
    tx = scenario.transmitter(tx_id)
    logger.info(f"📡 Processing pair {pair} ({len(trace.samples)} samples, {len(tracks)} tracks)")

    if tracks:
        trace = _stage("prepare", pair, crop_trace, trace, min(t.start_time for t in tracks), max(t.end_time for t in tracks))
    est = estimate_position(anchor, trace, tracks, scenario.wavelength, config, max_events, pair)
    if max_events is not None and est.events:
        trace = _stage("prepare", pair, crop_trace, trace, trace.start_time, est.events[-1].t_end)

    def evaluate():
        horizon = trace.observation_length
        truth = scenario_truth_sections(scenario, anchor_id, tx_id, tracks)
        durations = confusion(event_sections(est.events, trace.start_time, horizon),
                              truth_section_set(truth, trace.start_time, horizon))
        distances: List[float] = []
        if len(est.points):
            distances = boundary_distance_cdf(est.points, link_params(anchor, tx.position, scenario.wavelength))
        error = localization_error(est.estimate, tx.position) if est.estimate else None
        return durations, distances, error

    durations, distances, error = _stage("evaluate", pair, evaluate)
    report = PairReport(
        anchor_id=anchor_id,
        tx_id=tx_id,
        status="ok" if est.estimate is not None else "insufficient_events",
        events=est.events,
        dropped_events=est.points.dropped_events,
        boundary_point_count=len(est.points),
        fit=est.fit,
        estimate=est.estimate,
        truth=tx.position,
        error=error,
        confusion=durations,
        section_accuracy=durations.accuracy(trace.observation_length) if trace.observation_length > 0 else None,
        boundary_distance_percentiles=distance_percentiles(distances),
        boundary_distances=distances,
    )
    if error is not None:
        logger.info(f"✅ {pair}: estimate ({est.estimate.x:.3f}, {est.estimate.y:.3f}) m, error {error:.3f} m")
    return PairOutcome(report, trace)


def unblocked_mean_power(trace: RssiTrace, events: Sequence[BlockageEvent]) -> float:
    """Mean received power outside the detected blockage sections (all samples if none remain)."""
    mask = np.ones(len(trace.samples), dtype=bool)
    for e in events:
        mask &= ~((trace.times >= e.t_start) & (trace.times <= e.t_end))
    values = trace.values[mask] if mask.any() else trace.values
    return float(values.mean())


def triangulation_baselines(scenario: Scenario, outcomes: Sequence[PairOutcome], config: PipelineConfig) -> List[BaselineReport]:
    baselines = []
    for tx in scenario.transmitters:
        readings = [
            AnchorReading(anchor_position=scenario.anchor(o.report.anchor_id).position,
                          mean_power=unblocked_mean_power(o.trace, o.report.events),
                          anchor_id=o.report.anchor_id)
            for o in outcomes if o.report.tx_id == tx.id
        ]
        if len(readings) < 3:
            logger.warning(f"⚠️ {tx.id}: {len(readings)} anchors, triangulation baseline skipped")
            continue
        estimate = _stage("baseline", tx.id, trilaterate, readings, config.path_loss)
        baselines.append(BaselineReport(tx_id=tx.id, anchors_used=[r.anchor_id for r in readings], estimate=estimate,
                                        truth=tx.position, error=localization_error(estimate, tx.position)))
        logger.info(f"📶 Triangulation {tx.id}: ({estimate.x:.3f}, {estimate.y:.3f}) m, error {baselines[-1].error:.3f} m")
    return baselines


def summarize(scenario: Scenario, outcomes: Sequence[PairOutcome], baselines: List[BaselineReport]) -> RunReport:
    pairs = [o.report for o in outcomes]
    errors = [p.error for p in pairs if p.error is not None]
    by_tx: Dict[str, float] = {}
    for tx in scenario.transmitters:
        tx_errors = [p.error for p in pairs if p.tx_id == tx.id and p.error is not None]
        if tx_errors:
            by_tx[tx.id] = float(np.mean(tx_errors))
    with_confusion = [(p, o.trace.observation_length) for p, o in zip(pairs, outcomes) if p.confusion is not None]
    total_horizon = sum(h for _, h in with_confusion)
    accuracy = sum(p.confusion.tp + p.confusion.tn for p, _ in with_confusion) / total_horizon if total_horizon > 0 else None
    return RunReport(
        scenario=scenario.name,
        seed=scenario.rng_seed,
        horizon=max((o.trace.observation_length for o in outcomes), default=0.0),
        pairs=pairs,
        baselines=baselines,
        mean_error=float(np.mean(errors)) if errors else None,
        mean_error_by_tx=by_tx,
        section_accuracy=accuracy,
    )


async def run_pipeline(scenario: Scenario, config: PipelineConfig = PipelineConfig(),
                       channel: ChannelConfig = ChannelConfig(),
                       traces: Optional[Dict[PairKey, RssiTrace]] = None,
                       track_ids: Optional[Sequence[str]] = None,
                       max_events: Optional[int] = None,
                       pairs: Optional[Sequence[PairKey]] = None) -> RunReport:
    """
    Core use case: localize every transmitter from every anchor.
    1. Take the recorded trace of each pair, or synthesize it from the scenario
    2. Run detection, boundary estimation, fitting and evaluation per pair in worker threads
    3. Triangulate each transmitter from the unblocked mean powers
    4. Assemble the run report in pair order
    """
    pairs = list(pairs) if pairs else [(a.id, t.id) for a in scenario.anchors for t in scenario.transmitters]
    tracks = select_tracks(scenario.tracks, track_ids)
    logger.info(f"🚀 Running SARR-LOC on '{scenario.name}' (seed {scenario.rng_seed}): {len(pairs)} pairs, {len(tracks)} tracks")
    semaphore = asyncio.Semaphore(config.max_concurrency)

    def _run_pair(anchor_id: str, tx_id: str) -> PairOutcome:
        if traces is not None:
            if (anchor_id, tx_id) not in traces:
                raise PipelineStageError("prepare", f"{anchor_id}/{tx_id}", InputError("no trace recorded for this pair"))
            trace = traces[(anchor_id, tx_id)]
        else:
            trace = _stage("simulate", f"{anchor_id}/{tx_id}", synth_rssi, scenario, anchor_id, tx_id, channel)
        return process_pair(scenario, anchor_id, tx_id, trace, config, tracks, max_events)

    async def _guarded(anchor_id: str, tx_id: str) -> PairOutcome:
        async with semaphore:
            return await asyncio.to_thread(_run_pair, anchor_id, tx_id)

    outcomes = await asyncio.gather(*[_guarded(a, t) for a, t in pairs])
    baselines = triangulation_baselines(scenario, outcomes, config)
    report = summarize(scenario, outcomes, baselines)
    mean = f"{report.mean_error:.3f} m" if report.mean_error is not None else "n/a"
    logger.info(f"🎉 Run complete: mean error {mean} over {sum(p.status == 'ok' for p in report.pairs)} localized pairs")
    return report


def run_pipeline_sync(*args, **kwargs) -> RunReport:
    return asyncio.run(run_pipeline(*args, **kwargs))
