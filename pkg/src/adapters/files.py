"""
This module handles reading and writing SARR-LOC data on disk.

- RSSI traces: CSV `time_s,rssi_dbm` (resampled to a uniform grid when timestamps are uneven)
- Obstacle tracks: CSV `time_s,x_m,y_m` with optional `nx,ny` direction columns and an optional `track_id`
  column when one file holds several tracks
- Events, sections, CDF and error tables: CSV
- Scenario, pipeline configuration, calibration and run reports: YAML with a stable key order

Validation failures at ingestion are raised as InputError so callers see one error family per bad file.
"""

import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import yaml
from dotenv import load_dotenv
load_dotenv()
from pydantic import ValidationError

from src.core.entities import (
    AnchorPose,
    Arena,
    BlockageEvent,
    CalibrationModel,
    ChannelConfig,
    ObstacleTrack,
    PipelineConfig,
    Point2,
    RssiTrace,
    RunReport,
    Scenario,
    TrackSample,
    Transmitter,
)
from src.core.errors import InputError
from src.adapters.simulator import ROOM_ROUND_TRIPS, ROOM_SPEED, ROOM_WIDTH, build_scenario

from utils.logging_setup import get_logger
logger = get_logger(__name__, log_file="adapters.log")

PathLike = Union[str, Path]

DEFAULT_CONFIG_PATH = os.getenv("SARRLOC_CONFIG")
# relative deviation from the median spacing above which a trace is resampled
UNIFORM_TOLERANCE = 1e-6
FLOAT_FORMAT = "%.6f"


def _read_csv(path: PathLike, required: Sequence[str]) -> pd.DataFrame:
    try:
        df = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise InputError(f"cannot read {path}: {e}") from e
    missing = [c for c in required if c not in df.columns]
    if missing:
        raise InputError(f"{path} is missing columns {missing}")
    numeric = [c for c in df.columns if c != "track_id"]
    try:
        values = df[numeric].to_numpy(dtype=float)
    except ValueError as e:
        raise InputError(f"{path} contains non-numeric values: {e}") from e
    if not np.all(np.isfinite(values)):
        raise InputError(f"{path} contains empty or non-finite values")
    return df


def _write_csv(df: pd.DataFrame, path: PathLike) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT)


# ─────────────────────────────────────────────
# Traces
# ─────────────────────────────────────────────
def read_trace(path: PathLike, sample_interval: Optional[float] = None) -> RssiTrace:
    """Load a trace; uneven timestamps (or a requested interval) trigger linear resampling."""
    df = _read_csv(path, ["time_s", "rssi_dbm"]).sort_values("time_s", kind="stable")
    times = df["time_s"].to_numpy(dtype=float)
    values = df["rssi_dbm"].to_numpy(dtype=float)
    if len(times) < 2:
        raise InputError(f"{path}: a trace needs at least 2 samples")
    steps = np.diff(times)
    if np.any(steps <= 0):
        raise InputError(f"{path}: duplicate timestamps")

    median = float(np.median(steps))
    interval = sample_interval or median
    uniform = np.all(np.abs(steps - median) <= UNIFORM_TOLERANCE * median)
    if not uniform or abs(interval - median) > UNIFORM_TOLERANCE * median:
        count = int(np.floor((times[-1] - times[0]) / interval + 1e-9)) + 1
        grid = times[0] + interval * np.arange(count)
        values = np.interp(grid, times, values)
        logger.info(f"🔁 Resampled {path} from {len(times)} to {count} samples at {interval:.4f} s")
    try:
        return RssiTrace(samples=values.tolist(), sample_interval=interval, start_time=float(times[0]))
    except ValidationError as e:
        raise InputError(f"{path}: {e}") from e


def write_trace(trace: RssiTrace, path: PathLike) -> None:
    _write_csv(pd.DataFrame({"time_s": trace.times, "rssi_dbm": trace.values}), path)


# ─────────────────────────────────────────────
# Tracks
# ─────────────────────────────────────────────
def _track_from_frame(df: pd.DataFrame, track_id: str, width: float) -> ObstacleTrack:
    has_dir = {"nx", "ny"} <= set(df.columns)
    samples = []
    for row in df.sort_values("time_s", kind="stable").itertuples(index=False):
        direction = Point2(x=row.nx, y=row.ny) if has_dir else None
        samples.append(TrackSample(t=row.time_s, center=Point2(x=row.x_m, y=row.y_m), direction=direction))
    return ObstacleTrack(track_id=track_id, samples=samples, width=width)


def read_tracks(path: PathLike, width: float = ROOM_WIDTH) -> List[ObstacleTrack]:
    """Load one track per `track_id` (order of first appearance), or a single track named after the file."""
    df = _read_csv(path, ["time_s", "x_m", "y_m"])
    try:
        if "track_id" not in df.columns:
            return [_track_from_frame(df, Path(path).stem, width)]
        df["track_id"] = df["track_id"].astype(str)
        return [_track_from_frame(group, str(tid), width) for tid, group in df.groupby("track_id", sort=False)]
    except ValidationError as e:
        raise InputError(f"{path}: {e}") from e


def write_tracks(tracks: Sequence[ObstacleTrack], path: PathLike) -> None:
    with_dir = all(t.directions is not None for t in tracks)
    frames = []
    for track in tracks:
        frame = pd.DataFrame({"track_id": track.track_id, "time_s": track.times,
                              "x_m": track.centers[:, 0], "y_m": track.centers[:, 1]})
        if with_dir:
            frame["nx"], frame["ny"] = track.directions[:, 0], track.directions[:, 1]
        frames.append(frame)
    _write_csv(pd.concat(frames, ignore_index=True), path)


# ─────────────────────────────────────────────
# Tables
# ─────────────────────────────────────────────
def write_events(events: Sequence[BlockageEvent], path: PathLike) -> None:
    columns = ["t_start", "t_end", "correlation", "template_index"]
    _write_csv(pd.DataFrame([e.model_dump() for e in events], columns=columns), path)


def write_sections(intervals: Sequence[Tuple[float, float]], path: PathLike) -> None:
    _write_csv(pd.DataFrame(list(intervals), columns=["t_start", "t_end"]), path)


def read_calibration_pairs(path: PathLike) -> List[Tuple[Point2, Point2]]:
    df = _read_csv(path, ["raw_x", "raw_y", "true_x", "true_y"])
    return [(Point2(x=r.raw_x, y=r.raw_y), Point2(x=r.true_x, y=r.true_y)) for r in df.itertuples(index=False)]


def write_cdf(distances: Sequence[float], path: PathLike) -> None:
    """Empirical CDF as `distance_m,cdf` rows."""
    values = np.sort(np.asarray(distances, dtype=float))
    cdf = np.arange(1, len(values) + 1) / max(len(values), 1)
    _write_csv(pd.DataFrame({"distance_m": values, "cdf": cdf}), path)


def write_error_table(report: RunReport, path: PathLike) -> None:
    rows = [
        {
            "anchor_id": p.anchor_id,
            "tx_id": p.tx_id,
            "status": p.status,
            "events": len(p.events),
            "error_m": p.error,
            "d_m": p.fit.params.d if p.fit else None,
            "theta_deg": float(np.degrees(p.fit.params.theta)) if p.fit else None,
            "section_accuracy": p.section_accuracy,
        }
        for p in report.pairs
    ]
    rows += [{"anchor_id": "triangulation", "tx_id": b.tx_id, "status": "ok", "error_m": b.error} for b in report.baselines]
    _write_csv(pd.DataFrame(rows), path)


# ─────────────────────────────────────────────
# YAML documents
# ─────────────────────────────────────────────
def load_yaml(path: PathLike) -> Dict[str, Any]:
    try:
        with open(path, "r") as f:
            doc = yaml.safe_load(f) or {}
    except (OSError, yaml.YAMLError) as e:
        raise InputError(f"cannot read {path}: {e}") from e
    if not isinstance(doc, dict):
        raise InputError(f"{path} must hold a mapping at the top level")
    return doc


def dump_yaml(doc: Dict[str, Any], path: PathLike) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        yaml.safe_dump(doc, f, sort_keys=False, allow_unicode=True)


def deep_update(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """Nested dict merge; override values win, None values are ignored at every depth."""
    merged = dict(base)
    for key, value in overrides.items():
        if value is None:
            continue
        if isinstance(value, dict):
            nested = merged.get(key)
            merged[key] = deep_update(nested if isinstance(nested, dict) else {}, value)
        else:
            merged[key] = value
    return merged


def load_pipeline_config(path: Optional[PathLike] = None, overrides: Optional[Dict[str, Any]] = None,
                         base: Optional[PipelineConfig] = None) -> PipelineConfig:
    """Layered PipelineConfig: base, then a YAML file (its `pipeline` section if present), then flag overrides.

    The file defaults to SARRLOC_CONFIG when no path is given.
    """
    path = path or DEFAULT_CONFIG_PATH
    doc: Dict[str, Any] = base.model_dump(mode="json") if base is not None else {}
    if path:
        loaded = load_yaml(path)
        doc = deep_update(doc, loaded.get("pipeline", loaded))
        logger.debug(f"pipeline config from {path}")
    doc = deep_update(doc, overrides or {})
    try:
        return PipelineConfig.model_validate(doc)
    except ValidationError as e:
        raise InputError(f"invalid pipeline configuration: {e}") from e


def scenario_from_dict(doc: Dict[str, Any], base_dir: Optional[PathLike] = None) -> Tuple[Scenario, ChannelConfig, PipelineConfig]:
    """Build a scenario from its document: explicit `tracks` (CSV paths) or `lines` walked by the obstacle.

    Relative track paths resolve against base_dir (the scenario file's directory).
    """
    try:
        anchors = [AnchorPose(id=str(a["id"]), position=Point2(x=a["x"], y=a["y"]), rotation=a.get("rotation", 0.0))
                   for a in doc["anchors"]]
        transmitters = [Transmitter(id=str(t["id"]), position=Point2(x=t["x"], y=t["y"])) for t in doc["transmitters"]]
        arena = Arena.model_validate(doc.get("arena", {}))
        channel = ChannelConfig.model_validate(doc.get("channel", {}))
        pipeline = PipelineConfig.model_validate(doc.get("pipeline", {}))
        obstacle = doc.get("obstacle", {})
        if "lines" in doc:
            lines = [(Point2(x=l["x0"], y=l["y0"]), Point2(x=l["x1"], y=l["y1"])) for l in doc["lines"]]
            scenario = build_scenario(
                doc.get("name", "scenario"), anchors, transmitters, lines, doc["wavelength"],
                speed=obstacle.get("speed", ROOM_SPEED),
                width=obstacle.get("width", ROOM_WIDTH),
                round_trips=obstacle.get("round_trips", ROOM_ROUND_TRIPS),
                interval=obstacle.get("interval", channel.sample_interval),
                gap=obstacle.get("gap", 5.0),
                rng_seed=doc.get("rng_seed", 0),
                arena=arena,
            )
        else:
            tracks: List[ObstacleTrack] = []
            for track_path in doc.get("tracks", []):
                track_path = Path(track_path)
                if base_dir is not None and not track_path.is_absolute():
                    track_path = Path(base_dir) / track_path
                tracks.extend(read_tracks(track_path, width=obstacle.get("width", ROOM_WIDTH)))
            scenario = Scenario(name=doc.get("name", "scenario"), arena=arena, anchors=anchors,
                                transmitters=transmitters, wavelength=doc["wavelength"], tracks=tracks,
                                rng_seed=doc.get("rng_seed", 0))
    except KeyError as e:
        raise InputError(f"scenario document is missing {e}") from e
    except ValidationError as e:
        raise InputError(f"invalid scenario document: {e}") from e
    return scenario, channel, pipeline


def load_scenario(path: PathLike) -> Tuple[Scenario, ChannelConfig, PipelineConfig]:
    scenario, channel, pipeline = scenario_from_dict(load_yaml(path), base_dir=Path(path).parent)
    logger.info(f"🗺️ Loaded scenario '{scenario.name}': {len(scenario.anchors)} anchors, "
                f"{len(scenario.transmitters)} transmitters, {len(scenario.tracks)} tracks")
    return scenario, channel, pipeline


def scenario_to_dict(scenario: Scenario, channel: ChannelConfig, pipeline: PipelineConfig,
                     tracks_path: str) -> Dict[str, Any]:
    """Scenario document referring to its tracks by CSV path, so recorded runs can be replayed."""
    width = scenario.tracks[0].width if scenario.tracks else ROOM_WIDTH
    return {
        "name": scenario.name,
        "rng_seed": scenario.rng_seed,
        "wavelength": scenario.wavelength,
        "arena": scenario.arena.model_dump(mode="json"),
        "anchors": [{"id": a.id, "x": a.position.x, "y": a.position.y, "rotation": a.rotation} for a in scenario.anchors],
        "transmitters": [{"id": t.id, "x": t.position.x, "y": t.position.y} for t in scenario.transmitters],
        "obstacle": {"width": width},
        "tracks": [tracks_path],
        "channel": channel.model_dump(mode="json"),
        "pipeline": pipeline.model_dump(mode="json"),
    }


def write_calibration(model: CalibrationModel, path: PathLike) -> None:
    dump_yaml(model.model_dump(mode="json"), path)


def read_calibration(path: PathLike) -> CalibrationModel:
    try:
        return CalibrationModel.model_validate(load_yaml(path))
    except ValidationError as e:
        raise InputError(f"{path}: {e}") from e


def write_report(report: RunReport, path: PathLike) -> None:
    """Report as YAML in field order; identical reports give byte-identical files."""
    dump_yaml(report.model_dump(mode="json"), path)
    logger.info(f"💾 Report written to {path}")


def read_report(path: PathLike) -> RunReport:
    try:
        return RunReport.model_validate(load_yaml(path))
    except ValidationError as e:
        raise InputError(f"{path}: {e}") from e
