"""
This file defines the core entities for SARR-LOC: the geometric primitives of the first Fresnel zone (FFZ),
the obstacle and RSSI time series the localizer consumes, the detector/fitter configuration, and the result
records produced by each pipeline stage.

- Point2, Segment2, FresnelParams describe the anchor-relative FFZ geometry (anchor at the origin)
- ObstacleTrack and RssiTrace are the two sensor inputs (camera-derived obstacle motion, received power)
- TemplateParams, DetectionConfig, BlockageEvent belong to blockage detection
- BoundaryPoint(Set), GridConfig, FitResult belong to boundary estimation and ellipse fitting
- PathLossModel, AnchorReading feed the triangulation baseline
- Scenario, ChannelConfig describe simulated experiments; SectionSet, ConfusionDurations the evaluation
- PipelineConfig and the report models tie a full run together

All models are frozen so values can be shared between the per-pair worker threads.
"""

import math
from enum import Enum
from functools import cached_property
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

TWO_PI = 2.0 * math.pi
UNIT_TOLERANCE = 1e-9

DEFAULT_TEMPLATE_PS = (0.25, 0.5, 1.0)
DEFAULT_TEMPLATE_TAUS = (0.5, 1.0, 2.0, 4.0)


def normalize_angle(theta: float) -> float:
    """Wrap an angle into [0, 2π)."""
    wrapped = math.fmod(theta, TWO_PI)
    if wrapped < 0.0:
        wrapped += TWO_PI
    # fmod of tiny negatives can round up to exactly 2π
    return 0.0 if wrapped >= TWO_PI else wrapped


class Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


# ─────────────────────────────────────────────
# Geometry
# ─────────────────────────────────────────────
class Point2(Frozen):
    """A point in metres; in the anchor-relative frame the anchor sits at the origin."""
    x: float = Field(..., allow_inf_nan=False)
    y: float = Field(..., allow_inf_nan=False)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    def norm(self) -> float:
        return math.hypot(self.x, self.y)


class Side(str, Enum):
    LEFT = "left"
    RIGHT = "right"
    UNASSIGNED = "unassigned"


class PointKind(str, Enum):
    START = "start"
    END = "end"


class FitMethod(str, Enum):
    PLAIN = "plain"
    SPLIT = "split"


class FresnelParams(Frozen):
    """FFZ of one anchor/transmitter link, expressed relative to the anchor."""
    d: float = Field(..., gt=0, allow_inf_nan=False, description="Anchor–transmitter distance [m]")
    theta: float = Field(..., allow_inf_nan=False, description="Bearing of the transmitter from +x [rad]")
    wavelength: float = Field(..., gt=0, allow_inf_nan=False, description="Carrier wavelength λ [m]")

    @field_validator("theta")
    @classmethod
    def _wrap_theta(cls, value: float) -> float:
        return normalize_angle(value)

    @property
    def semi_major(self) -> float:
        return (2.0 * self.d + self.wavelength) / 4.0

    @property
    def semi_minor(self) -> float:
        return math.sqrt(self.wavelength * (4.0 * self.d + self.wavelength)) / 4.0

    @property
    def center(self) -> Point2:
        return Point2(x=0.5 * self.d * math.cos(self.theta), y=0.5 * self.d * math.sin(self.theta))

    @property
    def transmitter(self) -> Point2:
        return Point2(x=self.d * math.cos(self.theta), y=self.d * math.sin(self.theta))


class Segment2(Frozen):
    a: Point2
    b: Point2

    @property
    def length(self) -> float:
        return math.hypot(self.b.x - self.a.x, self.b.y - self.a.y)


class AnchorPose(Frozen):
    """Anchor position in the world frame plus the rotation of its local frame."""
    id: str
    position: Point2
    rotation: float = Field(0.0, allow_inf_nan=False, description="Local frame rotation [rad]")


class Transmitter(Frozen):
    id: str
    position: Point2


# ─────────────────────────────────────────────
# Obstacle tracks
# ─────────────────────────────────────────────
class TrackSample(Frozen):
    t: float = Field(..., allow_inf_nan=False, description="Timestamp [s]")
    center: Point2
    direction: Optional[Point2] = Field(None, description="Unit motion direction n(t); derived from chords when absent")


class ObstacleTrack(Frozen):
    """Camera-derived obstacle centre positions over time, modelled as a thin board of a given width."""
    track_id: str = "track"
    samples: List[TrackSample] = Field(..., min_length=2)
    width: float = Field(..., ge=0, allow_inf_nan=False, description="Board width w [m]")

    @model_validator(mode="after")
    def _check_samples(self):
        times = [s.t for s in self.samples]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("track timestamps must be strictly increasing")
        for sample in self.samples:
            if sample.direction is not None and abs(sample.direction.norm() - 1.0) > UNIT_TOLERANCE:
                raise ValueError(f"direction at t={sample.t} is not a unit vector")
        return self

    @cached_property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples], dtype=float)

    @cached_property
    def centers(self) -> np.ndarray:
        return np.array([[s.center.x, s.center.y] for s in self.samples], dtype=float)

    @cached_property
    def directions(self) -> Optional[np.ndarray]:
        if any(s.direction is None for s in self.samples):
            return None
        return np.array([[s.direction.x, s.direction.y] for s in self.samples], dtype=float)

    @cached_property
    def chord_directions(self) -> np.ndarray:
        """Unit chord of every sample interval; stationary intervals borrow the nearest moving one."""
        chords = np.diff(self.centers, axis=0)
        lengths = np.linalg.norm(chords, axis=1)
        moving = np.flatnonzero(lengths > 1e-12)
        if moving.size == 0:
            return np.full_like(chords, np.nan)
        index = np.arange(len(chords))
        pos = np.searchsorted(moving, index)
        before = moving[np.clip(pos - 1, 0, moving.size - 1)]
        after = moving[np.clip(pos, 0, moving.size - 1)]
        nearest = np.where(np.abs(index - before) <= np.abs(after - index), before, after)
        return chords[nearest] / lengths[nearest, None]

    @property
    def start_time(self) -> float:
        return self.samples[0].t

    @property
    def end_time(self) -> float:
        return self.samples[-1].t

    def covers(self, t: float) -> bool:
        return self.start_time <= t <= self.end_time

    @property
    def mean_speed(self) -> float:
        """Obstacle speed v averaged over consecutive samples."""
        steps = np.linalg.norm(np.diff(self.centers, axis=0), axis=1)
        return float(steps.sum() / (self.end_time - self.start_time))


# ─────────────────────────────────────────────
# Blockage detection
# ─────────────────────────────────────────────
class RssiTrace(Frozen):
    """Uniformly sampled received power r(t) in dBm."""
    samples: List[float] = Field(..., min_length=2)
    sample_interval: float = Field(..., gt=0, allow_inf_nan=False, description="τ^s [s]")
    start_time: float = Field(0.0, allow_inf_nan=False)

    @field_validator("samples")
    @classmethod
    def _finite(cls, values: List[float]) -> List[float]:
        if not np.all(np.isfinite(values)):
            raise ValueError("RSSI samples must be finite")
        return values

    @property
    def observation_length(self) -> float:
        """t^obs = (count − 1)·τ^s."""
        return (len(self.samples) - 1) * self.sample_interval

    @cached_property
    def values(self) -> np.ndarray:
        return np.asarray(self.samples, dtype=float)

    @cached_property
    def times(self) -> np.ndarray:
        return self.start_time + np.arange(len(self.samples)) * self.sample_interval

    @property
    def end_time(self) -> float:
        return self.start_time + self.observation_length


class TemplateParams(Frozen):
    """Blockage template parameters w = [p, τ]."""
    p: float = Field(..., gt=0, allow_inf_nan=False, description="Ramp fraction")
    tau: float = Field(..., gt=0, allow_inf_nan=False, description="Timescale [s]")

    @property
    def length(self) -> float:
        """t^tmp = (1 + p)·τ."""
        return (1.0 + self.p) * self.tau


def default_template_bank() -> List[TemplateParams]:
    return [TemplateParams(p=p, tau=tau) for p in DEFAULT_TEMPLATE_PS for tau in DEFAULT_TEMPLATE_TAUS]


class DetectionConfig(Frozen):
    templates: List[TemplateParams] = Field(default_factory=default_template_bank, min_length=1)
    correlation_threshold: float = Field(0.6, gt=0, lt=1, description="c^th")
    scan_step: Optional[float] = Field(None, gt=0, description="Scan step of the resolution loop; τ^s when unset")


class BlockageEvent(Frozen):
    t_start: float = Field(..., allow_inf_nan=False, description="t^s [s]")
    t_end: float = Field(..., allow_inf_nan=False, description="t^e [s]")
    correlation: float = Field(..., ge=-1.0, le=1.0, description="c^s")
    template_index: int = Field(..., ge=1, description="1-based position of the matching template in the bank")

    @model_validator(mode="after")
    def _ordered(self):
        if self.t_end <= self.t_start:
            raise ValueError("blockage must end after it starts")
        return self

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


# ─────────────────────────────────────────────
# Boundary points and fitting
# ─────────────────────────────────────────────
class BoundaryPoint(Frozen):
    position: Point2
    kind: PointKind
    event_index: int = Field(..., ge=0)
    side: Side = Side.UNASSIGNED


class BoundaryPointSet(Frozen):
    points: List[BoundaryPoint] = Field(default_factory=list)
    dropped_events: int = Field(0, ge=0, description="Events discarded because they fell outside every track span")

    @model_validator(mode="after")
    def _one_start_one_end_per_event(self):
        seen = set()
        for point in self.points:
            key = (point.event_index, point.kind)
            if key in seen:
                raise ValueError(f"event {point.event_index} has more than one {point.kind.value} point")
            seen.add(key)
        return self

    def __len__(self) -> int:
        return len(self.points)

    def on_side(self, side: Side) -> List[BoundaryPoint]:
        return [p for p in self.points if p.side == side]

    def xy(self, side: Optional[Side] = None) -> Tuple[np.ndarray, np.ndarray]:
        chosen = self.points if side is None else self.on_side(side)
        xs = np.array([p.position.x for p in chosen], dtype=float)
        ys = np.array([p.position.y for p in chosen], dtype=float)
        return xs, ys


class GridConfig(Frozen):
    d_range: Tuple[float, float] = (0.3, 12.0)
    d_step: float = Field(0.05, gt=0)
    theta_range: Tuple[float, float] = (0.0, TWO_PI)
    theta_step: float = Field(math.radians(0.5), gt=0)
    refine_levels: int = Field(2, ge=0)

    @model_validator(mode="after")
    def _ranges(self):
        if not 0 < self.d_range[0] < self.d_range[1]:
            raise ValueError("d_range must satisfy 0 < min < max")
        if not self.theta_range[0] < self.theta_range[1]:
            raise ValueError("theta_range must satisfy min < max")
        return self


class FitResult(Frozen):
    params: FresnelParams
    loss: float = Field(..., ge=0)
    point_count: int = Field(..., ge=2)
    method: FitMethod
    d_step: float = Field(..., gt=0, description="Step of the final refinement round [m]")
    theta_step: float = Field(..., gt=0, description="Step of the final refinement round [rad]")


# ─────────────────────────────────────────────
# Triangulation baseline
# ─────────────────────────────────────────────
class PathLossModel(Frozen):
    """Log-distance model r = −10·n·log10(d) + A."""
    exponent: float = Field(2.0, ge=1.5, le=6.0, description="Path-loss exponent n")
    ref_power: float = Field(-40.0, allow_inf_nan=False, description="A, received power at 1 m [dBm]")


class AnchorReading(Frozen):
    anchor_position: Point2
    mean_power: float = Field(..., allow_inf_nan=False, description="Mean received power [dBm]")
    anchor_id: Optional[str] = None


# ─────────────────────────────────────────────
# Simulation
# ─────────────────────────────────────────────
class ChannelConfig(Frozen):
    baseline_power: float = Field(-50.0, description="Unblocked power when no path-loss model is set [dBm]")
    blockage_depth: float = Field(10.0, gt=0, description="Attenuation while the board overlaps the FFZ [dB]")
    edge_ramp: float = Field(0.2, ge=0, description="Linear ramp duration at each blockage edge [s]")
    noise_sigma: float = Field(1.0, ge=0, description="White Gaussian noise [dB]")
    sample_interval: float = Field(0.05, gt=0, description="τ^s [s]")
    # outside: the dip pads each overlap by edge_ramp; inside: attenuation starts at first contact
    ramp_placement: Literal["inside", "outside"] = "outside"
    path_loss_exponent: Optional[float] = Field(2.0, ge=1.5, le=6.0)
    ref_power: float = Field(-40.0, description="Power at 1 m used with the path-loss exponent [dBm]")
    shadowing_sigma: float = Field(1.0, ge=0, description="Static per-link log-normal shadowing [dB]")


class Arena(Frozen):
    width: float = Field(6.0, gt=0)
    depth: float = Field(6.0, gt=0)

    def contains(self, point: Point2) -> bool:
        return 0.0 <= point.x <= self.width and 0.0 <= point.y <= self.depth


class Scenario(Frozen):
    name: str = "scenario"
    arena: Arena = Field(default_factory=Arena)
    anchors: List[AnchorPose] = Field(..., min_length=1)
    transmitters: List[Transmitter] = Field(..., min_length=1)
    wavelength: float = Field(..., gt=0)
    tracks: List[ObstacleTrack] = Field(default_factory=list)
    rng_seed: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _inside_arena(self):
        for item in [*self.anchors, *self.transmitters]:
            if not self.arena.contains(item.position):
                raise ValueError(f"{item.id} at ({item.position.x}, {item.position.y}) is outside the arena")
        for track in self.tracks:
            c = track.centers
            if c[:, 0].min() < 0 or c[:, 1].min() < 0 or c[:, 0].max() > self.arena.width or c[:, 1].max() > self.arena.depth:
                raise ValueError(f"track {track.track_id} leaves the arena")
        ids = [a.id for a in self.anchors] + [t.id for t in self.transmitters]
        if len(set(ids)) != len(ids):
            raise ValueError("anchor and transmitter ids must be unique")
        return self

    def anchor(self, anchor_id: str) -> AnchorPose:
        for anchor in self.anchors:
            if anchor.id == anchor_id:
                return anchor
        raise KeyError(f"unknown anchor {anchor_id!r}")

    def transmitter(self, tx_id: str) -> Transmitter:
        for tx in self.transmitters:
            if tx.id == tx_id:
                return tx
        raise KeyError(f"unknown transmitter {tx_id!r}")

    @property
    def start_time(self) -> float:
        return min(t.start_time for t in self.tracks)

    @property
    def end_time(self) -> float:
        return max(t.end_time for t in self.tracks)


# ─────────────────────────────────────────────
# Evaluation
# ─────────────────────────────────────────────
class SectionSet(Frozen):
    """Disjoint, sorted time sections within [0, horizon]; normalised on construction."""
    intervals: List[Tuple[float, float]] = Field(default_factory=list)
    horizon: float = Field(..., ge=0)

    @model_validator(mode="before")
    @classmethod
    def _normalize(cls, data):
        if not isinstance(data, dict):
            return data
        horizon = float(data["horizon"])
        clipped = sorted(
            (max(0.0, float(s)), min(horizon, float(e)))
            for s, e in data.get("intervals", [])
        )
        merged: List[Tuple[float, float]] = []
        for start, end in clipped:
            if end <= start:
                continue
            if merged and start <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], end))
            else:
                merged.append((start, end))
        return {**data, "intervals": merged, "horizon": horizon}

    @property
    def total_length(self) -> float:
        return float(sum(e - s for s, e in self.intervals))


class ConfusionDurations(Frozen):
    tp: float = Field(..., ge=0)
    tn: float = Field(..., ge=0)
    fp: float = Field(..., ge=0)
    fn: float = Field(..., ge=0)

    @property
    def total(self) -> float:
        return self.tp + self.tn + self.fp + self.fn

    def ratios(self, horizon: Optional[float] = None) -> Dict[str, float]:
        horizon = self.total if horizon is None else horizon
        return {k: getattr(self, k) / horizon for k in ("tp", "tn", "fp", "fn")}

    def accuracy(self, horizon: Optional[float] = None) -> float:
        """(tp + tn) / horizon."""
        horizon = self.total if horizon is None else horizon
        return (self.tp + self.tn) / horizon


# ─────────────────────────────────────────────
# Calibration, pipeline configuration and reports
# ─────────────────────────────────────────────
class CalibrationModel(Frozen):
    """Per-axis affine map world = scale·raw + offset."""
    scale_x: float = 1.0
    offset_x: float = 0.0
    scale_y: float = 1.0
    offset_y: float = 0.0

    @model_validator(mode="after")
    def _nonzero(self):
        if self.scale_x == 0 or self.scale_y == 0:
            raise ValueError("calibration scales must be nonzero")
        return self

    def apply(self, point: Point2) -> Point2:
        return Point2(x=self.scale_x * point.x + self.offset_x, y=self.scale_y * point.y + self.offset_y)


class PipelineConfig(Frozen):
    detection: DetectionConfig = Field(default_factory=DetectionConfig)
    grid: GridConfig = Field(default_factory=GridConfig)
    method: FitMethod = FitMethod.SPLIT
    path_loss: PathLossModel = Field(default_factory=PathLossModel)
    min_events: int = Field(1, ge=1, description="Fewer detected events than this flags the pair as insufficient")
    max_concurrency: int = Field(4, ge=1)


class PairReport(Frozen):
    anchor_id: str
    tx_id: str
    status: Literal["ok", "insufficient_events"]
    events: List[BlockageEvent] = Field(default_factory=list)
    dropped_events: int = 0
    boundary_point_count: int = 0
    fit: Optional[FitResult] = None
    estimate: Optional[Point2] = None
    truth: Optional[Point2] = None
    error: Optional[float] = None
    confusion: Optional[ConfusionDurations] = None
    section_accuracy: Optional[float] = None
    boundary_distance_percentiles: Dict[str, float] = Field(default_factory=dict)
    boundary_distances: List[float] = Field(default_factory=list)

    @model_validator(mode="after")
    def _consistent(self):
        if len(self.events) != self.boundary_point_count // 2 + self.dropped_events:
            raise ValueError(f"{self.anchor_id}/{self.tx_id}: event count does not match boundary points and drops")
        if self.status == "ok" and self.estimate is None:
            raise ValueError("an ok pair must carry an estimate")
        return self


class BaselineReport(Frozen):
    tx_id: str
    anchors_used: List[str]
    estimate: Point2
    truth: Optional[Point2] = None
    error: Optional[float] = None


class RunReport(Frozen):
    scenario: str
    seed: int
    horizon: float
    pairs: List[PairReport]
    baselines: List[BaselineReport] = Field(default_factory=list)
    mean_error: Optional[float] = None
    mean_error_by_tx: Dict[str, float] = Field(default_factory=dict)
    section_accuracy: Optional[float] = None
