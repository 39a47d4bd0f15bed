"""
This module is the synthetic data source for SARR-LOC.
It builds scenarios (anchors, transmitters, obstacle tracks along straight lines), computes the exact
ground-truth blockage sections of every (anchor, transmitter) link and synthesizes the RSSI trace an anchor
would record: log-distance path loss plus static shadowing, a trapezoidal dip while the obstacle overlaps
the FFZ, and white Gaussian noise.

All randomness is drawn from a generator seeded by (scenario seed, anchor id, transmitter id), so a trace
depends only on its inputs and not on the order in which links are synthesized.
"""

import math
import os
import zlib
from typing import List, Optional, Sequence, Tuple

import numpy as np
from dotenv import load_dotenv
load_dotenv()
from scipy.optimize import brentq

from src.core.blockage import edge_matched_bank
from src.core.entities import (
    AnchorPose,
    Arena,
    ChannelConfig,
    DetectionConfig,
    ObstacleTrack,
    PipelineConfig,
    Point2,
    RssiTrace,
    Scenario,
    SectionSet,
    TrackSample,
    Transmitter,
)
from src.core.errors import InputError
from src.core.geometry import link_params, region_edges, segment_min_ffz_value, track_in_frame

from utils.logging_setup import get_logger
logger = get_logger(__name__, log_file="adapters.log")

# ground-truth root bracketing grid and root tolerance [s]
TRUTH_SCAN_STEP = float(os.getenv("SARRLOC_TRUTH_SCAN_STEP", 0.01))
TRUTH_XTOL = float(os.getenv("SARRLOC_TRUTH_XTOL", 1e-5))
# distances below this are clamped in the path-loss model (near field)
MIN_LINK_DISTANCE = 0.1

ROOM_WAVELENGTH = 0.0574
ROOM_SPEED = 0.57
ROOM_WIDTH = 0.9
ROOM_ROUND_TRIPS = 6
ROOM_LINE_YS = (1.0, 2.0, 3.0, 4.0, 5.0, 5.8)
ROOM_LINE_X = (0.3, 5.7)
ROOM_ANCHORS = (("A", 1.0, 0.4), ("B", 3.0, 0.4), ("C", 5.0, 0.4))
ROOM_TRANSMITTERS = (("TD1", 2.0, 5.4), ("TD2", 4.2, 5.4))
# board crossings in the room last between about 2.1 s and 2.8 s
ROOM_TEMPLATE_LENGTHS = tuple(round(1.8 + 0.05 * k, 2) for k in range(29))

Interval = Tuple[float, float]


# ─────────────────────────────────────────────
# Tracks
# ─────────────────────────────────────────────
def synth_track(line: Tuple[Point2, Point2], speed: float, width: float, round_trips: int, interval: float,
                t0: float = 0.0, track_id: str = "track") -> ObstacleTrack:
    """Constant-speed back-and-forth motion along a line, sampled every interval plus at every turnaround.

    Turnarounds are samples so each chord lies on one leg; directions are left to the chords.
    """
    a, b = line[0].as_array(), line[1].as_array()
    length = float(np.hypot(*(b - a)))
    if length <= 0.0:
        raise InputError(f"track {track_id}: line endpoints coincide")
    if speed <= 0.0 or round_trips < 1 or interval <= 0.0:
        raise InputError(f"track {track_id}: speed, round trips and interval must be positive")
    unit = (b - a) / length
    leg = length / speed
    duration = 2.0 * leg * round_trips

    grid = interval * np.arange(int(math.floor(duration / interval + 1e-9)) + 1)
    turns = leg * np.arange(1, 2 * round_trips + 1)
    times = np.sort(np.concatenate([grid, turns]))
    keep = np.concatenate([[True], np.diff(times) > 1e-9 * max(1.0, duration)])
    times = times[keep]
    times[-1] = duration

    phase = np.mod(speed * times, 2.0 * length)
    travelled = np.where(phase <= length, phase, 2.0 * length - phase)
    # the final sample wraps to phase 0; it is back at the start point
    centers = a[None, :] + travelled[:, None] * unit[None, :]
    samples = [
        TrackSample(t=float(t0 + t), center=Point2(x=float(c[0]), y=float(c[1])))
        for t, c in zip(times, centers)
    ]
    return ObstacleTrack(track_id=track_id, samples=samples, width=width)


# ─────────────────────────────────────────────
# Ground truth
# ─────────────────────────────────────────────
def ground_truth_sections(scenario: Scenario, anchor_id: str, tx_id: str, track: ObstacleTrack) -> List[Interval]:
    """Maximal time intervals (absolute) during which the obstacle region intersects the link's true FFZ.

    g(t) = min F over O(t) − 1 is scanned on a fine grid and every sign change is polished with brentq.
    """
    anchor = scenario.anchor(anchor_id)
    fp = link_params(anchor, scenario.transmitter(tx_id).position, scenario.wavelength)
    local = track_in_frame(track, anchor)

    def gap(t):
        plus, minus = region_edges(local, t)
        return segment_min_ffz_value(plus[:, 0], plus[:, 1], minus[:, 0], minus[:, 1], fp) - 1.0

    count = int(math.ceil((local.end_time - local.start_time) / TRUTH_SCAN_STEP)) + 1
    times = np.linspace(local.start_time, local.end_time, count)
    inside = gap(times) <= 0.0

    def root(lo: float, hi: float) -> float:
        return brentq(lambda t: float(gap(t)[0]), lo, hi, xtol=TRUTH_XTOL)

    intervals: List[Interval] = []
    start: Optional[float] = float(times[0]) if inside[0] else None
    for k in np.flatnonzero(inside[1:] != inside[:-1]):
        lo, hi = float(times[k]), float(times[k + 1])
        edge = root(lo, hi) if gap(lo)[0] * gap(hi)[0] < 0.0 else (hi if inside[k + 1] else lo)
        if inside[k + 1]:
            start = edge
        else:
            intervals.append((start, edge))
            start = None
    if start is not None:
        intervals.append((start, float(times[-1])))
    logger.debug(f"{anchor_id}/{tx_id} track {track.track_id}: {len(intervals)} ground-truth sections")
    return intervals


def scenario_truth_sections(scenario: Scenario, anchor_id: str, tx_id: str,
                            tracks: Optional[Sequence[ObstacleTrack]] = None) -> List[Interval]:
    tracks = scenario.tracks if tracks is None else tracks
    intervals: List[Interval] = []
    for track in tracks:
        intervals.extend(ground_truth_sections(scenario, anchor_id, tx_id, track))
    return sorted(intervals)


def truth_section_set(intervals: Sequence[Interval], origin: float, horizon: float) -> SectionSet:
    """Absolute ground-truth intervals as a SectionSet relative to origin."""
    return SectionSet(intervals=[(s - origin, e - origin) for s, e in intervals], horizon=horizon)


# ─────────────────────────────────────────────
# Channel
# ─────────────────────────────────────────────
def overlap_shape(times: np.ndarray, sections: Sequence[Interval], edge_ramp: float,
                  placement: str = "outside") -> np.ndarray:
    """Attenuation shape in [0, 1]: trapezoids with edge_ramp-long linear edges around each section.

    "inside" ramps within the section (clamped to half its length), "outside" pads it at both ends.
    """
    times = np.asarray(times, dtype=float)
    shape = np.zeros_like(times)
    for s, e in sections:
        if placement == "inside":
            mid = 0.5 * (s + e)
            ramp = min(edge_ramp, mid - s)
            knots = [s, min(s + ramp, mid), max(e - ramp, mid), e]
        else:
            ramp = edge_ramp
            knots = [s - ramp, s, e, e + ramp]
        if ramp <= 0.0:
            dip = ((times >= knots[0]) & (times <= knots[3])).astype(float)
        else:
            dip = np.interp(times, knots, [0.0, 1.0, 1.0, 0.0], left=0.0, right=0.0)
        shape = np.maximum(shape, dip)
    return shape


def link_rng(scenario: Scenario, anchor_id: str, tx_id: str) -> np.random.Generator:
    seq = np.random.SeedSequence([scenario.rng_seed, zlib.crc32(anchor_id.encode()), zlib.crc32(tx_id.encode())])
    return np.random.default_rng(seq)


def unblocked_power(scenario: Scenario, anchor_id: str, tx_id: str, channel: ChannelConfig,
                    rng: np.random.Generator) -> float:
    """Link power without blockage: flat baseline, or log-distance path loss plus static shadowing."""
    if channel.path_loss_exponent is None:
        return channel.baseline_power
    a, t = scenario.anchor(anchor_id).position, scenario.transmitter(tx_id).position
    d = max(math.hypot(a.x - t.x, a.y - t.y), MIN_LINK_DISTANCE)
    shadowing = rng.normal(0.0, channel.shadowing_sigma) if channel.shadowing_sigma > 0 else 0.0
    return channel.ref_power - 10.0 * channel.path_loss_exponent * math.log10(d) + shadowing


def synth_rssi(scenario: Scenario, anchor_id: str, tx_id: str, channel: ChannelConfig = ChannelConfig()) -> RssiTrace:
    """RSSI the anchor records from the transmitter over the span of the scenario's tracks."""
    if not scenario.tracks:
        raise InputError(f"scenario {scenario.name} has no obstacle tracks to simulate")
    t0 = scenario.start_time
    count = int(math.floor((scenario.end_time - t0) / channel.sample_interval + 1e-9)) + 1
    times = t0 + channel.sample_interval * np.arange(count)

    sections = scenario_truth_sections(scenario, anchor_id, tx_id)
    shape = overlap_shape(times, sections, channel.edge_ramp, channel.ramp_placement)
    rng = link_rng(scenario, anchor_id, tx_id)
    base = unblocked_power(scenario, anchor_id, tx_id, channel, rng)
    noise = rng.normal(0.0, channel.noise_sigma, size=count) if channel.noise_sigma > 0 else np.zeros(count)
    power = base - channel.blockage_depth * shape + noise
    logger.info(f"📡 Synthesized {count} samples for {anchor_id}/{tx_id} ({len(sections)} blockage sections)")
    return RssiTrace(samples=power.tolist(), sample_interval=channel.sample_interval, start_time=t0)


# ─────────────────────────────────────────────
# Scenarios
# ─────────────────────────────────────────────
def build_scenario(name: str, anchors: Sequence[AnchorPose], transmitters: Sequence[Transmitter],
                   lines: Sequence[Tuple[Point2, Point2]], wavelength: float, speed: float = ROOM_SPEED,
                   width: float = ROOM_WIDTH, round_trips: int = ROOM_ROUND_TRIPS, interval: float = 0.05,
                   gap: float = 5.0, rng_seed: int = 0, arena: Arena = Arena()) -> Scenario:
    """Scenario whose obstacle walks each line in turn, separated by gap seconds of no tracking."""
    tracks = []
    t0 = 0.0
    for k, line in enumerate(lines, start=1):
        track = synth_track(line, speed, width, round_trips, interval, t0=t0, track_id=f"line{k}")
        tracks.append(track)
        t0 = track.end_time + gap
    return Scenario(name=name, arena=arena, anchors=list(anchors), transmitters=list(transmitters),
                    wavelength=wavelength, tracks=tracks, rng_seed=rng_seed)


def reference_room_scenario(seed: int = 0, round_trips: int = ROOM_ROUND_TRIPS, interval: float = 0.05) -> Scenario:
    """6×6 m room, three anchors along one wall, two transmitters along the opposite wall, six walking lines.

    Line 1 is nearest the anchors; line 6 lies beyond the transmitters and crosses no FFZ.
    """
    anchors = [AnchorPose(id=i, position=Point2(x=x, y=y)) for i, x, y in ROOM_ANCHORS]
    transmitters = [Transmitter(id=i, position=Point2(x=x, y=y)) for i, x, y in ROOM_TRANSMITTERS]
    lines = [(Point2(x=ROOM_LINE_X[0], y=y), Point2(x=ROOM_LINE_X[1], y=y)) for y in ROOM_LINE_YS]
    return build_scenario("reference-room", anchors, transmitters, lines, ROOM_WAVELENGTH,
                          round_trips=round_trips, interval=interval, rng_seed=seed)


def reference_room_channel(noise_sigma: float = 1.0) -> ChannelConfig:
    """Reference-room channel: attenuation starts when the board first touches the FFZ and ends when it leaves."""
    return ChannelConfig(noise_sigma=noise_sigma, ramp_placement="inside")


def reference_room_config() -> PipelineConfig:
    """Pipeline settings for the reference room: templates whose ramps match the channel's edge ramp,
    with total lengths spanning the room's crossing durations."""
    templates = edge_matched_bank(reference_room_channel().edge_ramp, ROOM_TEMPLATE_LENGTHS)
    return PipelineConfig(detection=DetectionConfig(templates=templates))
