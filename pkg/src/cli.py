"""
Command-line surface of SARR-LOC.

    simulate     scenario -> per-pair RSSI traces, obstacle tracks and ground-truth sections
    calibrate    camera reference pairs -> per-axis calibration model (optionally applied to a track file)
    detect       RSSI trace -> blockage events
    localize     RSSI trace + obstacle tracks + anchor pose -> transmitter position
    evaluate     full pipeline over a scenario (simulated or recorded traces) -> run report
    export-plot  run report -> boundary-distance CDF and error table CSVs

Flags override the pipeline config file (--config, or SARRLOC_CONFIG). Exit codes: 0 success,
2 input/validation error, 3 fit failure.

Run with `PYTHONPATH=. python -m src.cli --help`.
"""

import functools
import math
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import typer
from pydantic import ValidationError

from src.adapters.calibration import calibrate_track, fit_calibration
from src.adapters.files import (
    dump_yaml,
    load_pipeline_config,
    load_scenario,
    read_calibration_pairs,
    read_report,
    read_trace,
    read_tracks,
    scenario_to_dict,
    write_calibration,
    write_cdf,
    write_error_table,
    write_events,
    write_report,
    write_sections,
    write_trace,
    write_tracks,
)
from src.adapters.simulator import reference_room_channel, reference_room_config, reference_room_scenario, scenario_truth_sections, synth_rssi
from src.core.blockage import detect_multi
from src.core.entities import AnchorPose, ChannelConfig, FitMethod, PipelineConfig, Point2, RssiTrace, Scenario
from src.core.errors import FitError, PipelineStageError, SarrLocError
from src.core.use_cases import estimate_position, run_pipeline_sync

from utils.logging_setup import get_logger
logger = get_logger(__name__, log_file="cli.log")

EXIT_INPUT = 2
EXIT_FIT = 3

app = typer.Typer(help="Single-anchor RSSI localization from dynamic Fresnel-zone blockage.", no_args_is_help=True)


def exit_code_for(error: BaseException) -> int:
    cause = error.cause if isinstance(error, PipelineStageError) else error
    return EXIT_FIT if isinstance(cause, FitError) else EXIT_INPUT


def handle_errors(fn: Callable) -> Callable:
    """Map SARR-LOC and validation errors onto exit codes."""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (SarrLocError, ValidationError, KeyError) as e:
            logger.error(f"❌ {e}")
            raise typer.Exit(code=exit_code_for(e))
    return wrapper


def _overrides(method: Optional[FitMethod] = None, threshold: Optional[float] = None,
               jobs: Optional[int] = None, min_events: Optional[int] = None) -> Dict[str, Any]:
    return {
        "method": method.value if method else None,
        "detection": {"correlation_threshold": threshold},
        "max_concurrency": jobs,
        "min_events": min_events,
    }


def _scenario_inputs(scenario_path: Optional[Path], seed: Optional[int]) -> Tuple[Scenario, ChannelConfig, PipelineConfig]:
    if scenario_path is None:
        return reference_room_scenario(seed or 0), reference_room_channel(), reference_room_config()
    scenario, channel, pipeline = load_scenario(scenario_path)
    if seed is not None:
        scenario = scenario.model_copy(update={"rng_seed": seed})
    return scenario, channel, pipeline


def _pair_file(anchor_id: str, tx_id: str) -> str:
    return f"{anchor_id}_{tx_id}.csv"


# ─────────────────────────────────────────────
# Commands
# ─────────────────────────────────────────────
@app.command()
@handle_errors
def simulate(
    out: Path = typer.Option(Path("data/sim"), "--out", help="Output directory"),
    scenario_path: Optional[Path] = typer.Option(None, "--scenario", help="Scenario YAML; reference room when omitted"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Override the scenario seed"),
    noise_sigma: Optional[float] = typer.Option(None, "--noise-sigma", help="White noise σ [dB]"),
    blockage_depth: Optional[float] = typer.Option(None, "--blockage-depth", help="Blockage attenuation [dB]"),
):
    """Synthesize traces, tracks and ground truth for every (anchor, transmitter) pair."""
    scenario, channel, pipeline = _scenario_inputs(scenario_path, seed)
    updates = {k: v for k, v in {"noise_sigma": noise_sigma, "blockage_depth": blockage_depth}.items() if v is not None}
    channel = ChannelConfig.model_validate({**channel.model_dump(), **updates})

    write_tracks(scenario.tracks, out / "tracks.csv")
    for anchor in scenario.anchors:
        for tx in scenario.transmitters:
            write_trace(synth_rssi(scenario, anchor.id, tx.id, channel), out / "traces" / _pair_file(anchor.id, tx.id))
            write_sections(scenario_truth_sections(scenario, anchor.id, tx.id), out / "truth" / _pair_file(anchor.id, tx.id))
    dump_yaml(scenario_to_dict(scenario, channel, pipeline, "tracks.csv"), out / "scenario.yaml")
    typer.echo(f"Simulated {len(scenario.anchors) * len(scenario.transmitters)} pairs into {out}")


@app.command()
@handle_errors
def calibrate(
    pairs_path: Path = typer.Argument(..., help="CSV with raw_x,raw_y,true_x,true_y"),
    out: Path = typer.Option(Path("calibration.yaml"), "--out", help="Calibration model YAML"),
    track: Optional[Path] = typer.Option(None, "--track", help="Raw track CSV to calibrate"),
    track_out: Optional[Path] = typer.Option(None, "--track-out", help="Where to write the calibrated track"),
    width: float = typer.Option(0.9, "--width", help="Obstacle width [m]"),
):
    """Fit the per-axis camera calibration and optionally apply it to a track file."""
    model = fit_calibration(read_calibration_pairs(pairs_path))
    write_calibration(model, out)
    if track is not None:
        calibrated = [calibrate_track(t, model) for t in read_tracks(track, width=width)]
        write_tracks(calibrated, track_out or track.with_name(f"{track.stem}_calibrated.csv"))
    typer.echo(f"x = {model.scale_x:.6f}·raw + {model.offset_x:.6f}; y = {model.scale_y:.6f}·raw + {model.offset_y:.6f}")


@app.command()
@handle_errors
def detect(
    trace_path: Path = typer.Argument(..., help="Trace CSV (time_s,rssi_dbm)"),
    out: Optional[Path] = typer.Option(None, "--out", help="Events CSV"),
    config: Optional[Path] = typer.Option(None, "--config", help="Pipeline config YAML"),
    threshold: Optional[float] = typer.Option(None, "--threshold", help="Correlation threshold c^th"),
    interval: Optional[float] = typer.Option(None, "--interval", help="Resample to this interval [s]"),
):
    """Detect blockage events in one RSSI trace."""
    cfg = load_pipeline_config(config, _overrides(threshold=threshold))
    events = detect_multi(read_trace(trace_path, interval), cfg.detection)
    if out is not None:
        write_events(events, out)
    for e in events:
        typer.echo(f"{e.t_start:.3f}\t{e.t_end:.3f}\t{e.correlation:.3f}\t#{e.template_index}")


@app.command()
@handle_errors
def localize(
    trace_path: Path = typer.Argument(..., help="Trace CSV (time_s,rssi_dbm)"),
    tracks_path: Path = typer.Argument(..., help="Track CSV (time_s,x_m,y_m[,nx,ny][,track_id])"),
    anchor_x: float = typer.Option(..., "--anchor-x"),
    anchor_y: float = typer.Option(..., "--anchor-y"),
    rotation: float = typer.Option(0.0, "--rotation", help="Anchor frame rotation [rad]"),
    wavelength: float = typer.Option(0.0574, "--wavelength", help="Carrier wavelength [m]"),
    width: float = typer.Option(0.9, "--width", help="Obstacle width [m]"),
    config: Optional[Path] = typer.Option(None, "--config", help="Pipeline config YAML"),
    method: Optional[FitMethod] = typer.Option(None, "--method"),
    threshold: Optional[float] = typer.Option(None, "--threshold"),
    max_events: Optional[int] = typer.Option(None, "--max-events", help="Use only the first k events"),
    out: Optional[Path] = typer.Option(None, "--out", help="Write the estimate as YAML"),
):
    """Localize a transmitter from one anchor's trace and the obstacle tracks."""
    cfg = load_pipeline_config(config, _overrides(method=method, threshold=threshold))
    anchor = AnchorPose(id="anchor", position=Point2(x=anchor_x, y=anchor_y), rotation=rotation)
    trace: RssiTrace = read_trace(trace_path)
    est = estimate_position(anchor, trace, read_tracks(tracks_path, width=width), wavelength, cfg, max_events)
    if est.estimate is None:
        typer.echo(f"insufficient events ({len(est.events)} detected, {len(est.points)} boundary points)")
        raise typer.Exit(code=EXIT_FIT)
    doc = {
        "x": est.estimate.x,
        "y": est.estimate.y,
        "d": est.fit.params.d,
        "theta_deg": math.degrees(est.fit.params.theta),
        "loss": est.fit.loss,
        "events": len(est.events),
        "boundary_points": len(est.points),
    }
    if out is not None:
        dump_yaml(doc, out)
    typer.echo(f"({est.estimate.x:.3f}, {est.estimate.y:.3f}) m  d={doc['d']:.3f} m  θ={doc['theta_deg']:.2f}°")


@app.command()
@handle_errors
def evaluate(
    out: Path = typer.Option(Path("report.yaml"), "--out", help="Run report YAML"),
    scenario_path: Optional[Path] = typer.Option(None, "--scenario", help="Scenario YAML; reference room when omitted"),
    traces_dir: Optional[Path] = typer.Option(None, "--traces", help="Directory of recorded <anchor>_<tx>.csv traces"),
    seed: Optional[int] = typer.Option(None, "--seed"),
    config: Optional[Path] = typer.Option(None, "--config", help="Pipeline config YAML"),
    method: Optional[FitMethod] = typer.Option(None, "--method"),
    threshold: Optional[float] = typer.Option(None, "--threshold"),
    min_events: Optional[int] = typer.Option(None, "--min-events"),
    jobs: Optional[int] = typer.Option(None, "--jobs", help="Pairs processed concurrently"),
    track_ids: Optional[List[str]] = typer.Option(None, "--track", help="Restrict to these track ids (repeatable)"),
    max_events: Optional[int] = typer.Option(None, "--max-events", help="Truncate each observation after k events"),
):
    """Run the full pipeline and write the run report."""
    scenario, channel, pipeline = _scenario_inputs(scenario_path, seed)
    cfg = load_pipeline_config(config, _overrides(method, threshold, jobs, min_events), base=pipeline)
    traces = None
    if traces_dir is not None:
        traces = {
            (a.id, t.id): read_trace(traces_dir / _pair_file(a.id, t.id))
            for a in scenario.anchors for t in scenario.transmitters
        }
    report = run_pipeline_sync(scenario, cfg, channel, traces=traces, track_ids=track_ids, max_events=max_events)
    write_report(report, out)
    for p in report.pairs:
        error = f"{p.error:.3f} m" if p.error is not None else p.status
        typer.echo(f"{p.anchor_id}/{p.tx_id}: {error}")
    for b in report.baselines:
        typer.echo(f"triangulation/{b.tx_id}: {b.error:.3f} m")
    if report.mean_error is not None:
        typer.echo(f"mean error {report.mean_error:.3f} m, section accuracy {report.section_accuracy:.3f}")


@app.command("export-plot")
@handle_errors
def export_plot(
    report_path: Path = typer.Argument(..., help="Run report YAML"),
    out: Path = typer.Option(Path("plots"), "--out", help="Output directory"),
):
    """Write the boundary-distance CDF and the per-pair error table as CSV."""
    report = read_report(report_path)
    distances = [d for p in report.pairs for d in p.boundary_distances]
    write_cdf(distances, out / "boundary_cdf.csv")
    write_error_table(report, out / "errors.csv")
    typer.echo(f"Wrote {len(distances)} CDF points and {len(report.pairs)} pair rows to {out}")


if __name__ == "__main__":
    app()
