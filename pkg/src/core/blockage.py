"""
Blockage detection from an RSSI trace.

A blockage event is a dip in received power: it decreases, stays low while the obstacle overlaps the FFZ,
then recovers. Events are found by sliding a piecewise-linear template over the trace (zero-mean normalized
correlation), keeping local correlation maxima above a threshold, and, when several templates are used,
resolving overlapping candidates best first so that a better-correlated match is never displaced by a worse one.
"""

import bisect
import math
from typing import List, NamedTuple, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.ndimage import maximum_filter1d

from src.core.entities import BlockageEvent, DetectionConfig, RssiTrace, SectionSet, TemplateParams
from src.core.errors import ConfigError, InputError

from utils.logging_setup import get_logger
logger = get_logger(__name__, log_file="core.log")

# relative slack for floor((1+p)τ/τ^s) when the ratio is an integer up to rounding
_FLOOR_SLACK = 1e-9
# a window whose centred norm is below this fraction of its magnitude is treated as flat
_FLAT_RELATIVE = 1e-9


class Peak(NamedTuple):
    index: int
    time: float
    correlation: float


# ─────────────────────────────────────────────
# Template
# ─────────────────────────────────────────────
def template_value(w: TemplateParams, t):
    """Normalized template power r^tmp(t, w): 0 before and after, −1 on the floor, linear ramps of pτ/2."""
    ramp = 0.5 * w.p * w.tau
    knots = [0.0, ramp, w.length - ramp, w.length]
    values = np.interp(np.asarray(t, dtype=float), knots, [0.0, -1.0, -1.0, 0.0], left=0.0, right=0.0)
    return float(values) if np.ndim(values) == 0 else values


def template_sample_count(w: TemplateParams, interval: float) -> int:
    """n^tmp = ⌊(1+p)τ/τ^s⌋."""
    return int(math.floor(w.length / interval * (1.0 + _FLOOR_SLACK)))


def sample_template(w: TemplateParams, interval: float) -> np.ndarray:
    """Template sampled at t = 0, τ^s, …, n^tmp·τ^s."""
    if interval <= 0:
        raise ConfigError("sample interval must be positive")
    n_tmp = template_sample_count(w, interval)
    if n_tmp + 1 < 3:
        raise ConfigError(f"template (p={w.p}, tau={w.tau}) spans fewer than 3 samples at interval {interval}")
    return template_value(w, np.arange(n_tmp + 1) * interval)


def edge_matched_bank(edge_ramp: float, lengths: Sequence[float]) -> List[TemplateParams]:
    """One template per total length, each with ramps of edge_ramp seconds (pτ/2 = edge_ramp).

    p is rounded to 6 decimals so the bank reads cleanly in YAML documents.
    """
    bank = []
    for length in lengths:
        tau = round(float(length) - 2.0 * edge_ramp, 2)
        if tau <= 0:
            raise ConfigError(f"template length {length} s is too short for ramps of {edge_ramp} s")
        bank.append(TemplateParams(p=round(2.0 * edge_ramp / tau, 6), tau=tau))
    return bank


# ─────────────────────────────────────────────
# Correlation and peaks
# ─────────────────────────────────────────────
def normalized_correlation(trace: RssiTrace, w: TemplateParams) -> np.ndarray:
    """Zero-mean normalized correlation c_i of the trace window starting at sample i with the template.

    Windows (or a template) with zero variance correlate as 0.
    """
    template = sample_template(w, trace.sample_interval)
    width = len(template)
    values = trace.values
    if len(values) < width:
        raise InputError(f"trace of {len(values)} samples is shorter than a {width}-sample template")

    tmpl = template - template.mean()
    tmpl_norm = np.sqrt(np.sum(tmpl ** 2))
    windows = sliding_window_view(values, width)
    centred = windows - windows.mean(axis=1, keepdims=True)
    win_norm = np.sqrt(np.sum(centred ** 2, axis=1))
    scale = np.max(np.abs(windows), axis=1)
    flat = win_norm <= _FLAT_RELATIVE * np.sqrt(width) * np.maximum(scale, 1.0)
    if tmpl_norm == 0.0:
        return np.zeros(len(windows))

    denom = np.where(flat, 1.0, win_norm * tmpl_norm)
    corr = np.where(flat, 0.0, centred @ tmpl / denom)
    return np.clip(corr, -1.0, 1.0)


def detect_peaks(c: np.ndarray, window: int, sample_interval: float = 1.0, start_time: float = 0.0) -> List[Peak]:
    """Indices i with c_i = max{c_j : |j − i| < window/2} (clipped at the edges); ties keep the earliest."""
    c = np.asarray(c, dtype=float)
    if c.size == 0:
        return []
    radius = max(int(math.ceil(window / 2.0)) - 1, 0)
    local_max = maximum_filter1d(c, size=2 * radius + 1, mode="nearest")
    peaks = []
    for i in np.flatnonzero(c == local_max):
        if np.any(c[max(0, i - radius):i] == c[i]):
            continue
        peaks.append(Peak(index=int(i), time=start_time + i * sample_interval, correlation=float(c[i])))
    return peaks


# ─────────────────────────────────────────────
# Single and multi-template detection
# ─────────────────────────────────────────────
def detect_single(trace: RssiTrace, w: TemplateParams, cfg: DetectionConfig, template_index: int = 1) -> List[BlockageEvent]:
    """Thresholded correlation peaks of one template as blockage events t^e = t^s + (1+p)τ."""
    corr = normalized_correlation(trace, w)
    n_tmp = template_sample_count(w, trace.sample_interval)
    peaks = detect_peaks(corr, n_tmp, trace.sample_interval, trace.start_time)
    events = [
        BlockageEvent(t_start=pk.time, t_end=pk.time + w.length, correlation=pk.correlation, template_index=template_index)
        for pk in peaks
        if pk.correlation > cfg.correlation_threshold
    ]
    logger.debug(f"template #{template_index} (p={w.p}, tau={w.tau}): {len(peaks)} peaks, {len(events)} above threshold")
    return events


def resolve_candidates(candidates: Sequence[BlockageEvent], t_begin: float, t_end: float, step: float) -> List[BlockageEvent]:
    """Keep candidates best first, dropping any that overlap one already kept; result sorted by start.

    Best means highest correlation, then lower template index, then earlier start. Only candidates covering
    at least one scan instant t_begin + k·step before t_end take part.
    """
    if not candidates:
        return []
    starts = np.array([e.t_start for e in candidates])
    ends = np.array([e.t_end for e in candidates])
    corrs = np.array([e.correlation for e in candidates])
    kidx = np.array([e.template_index for e in candidates])
    # first scan instant strictly after each start
    k_first = np.maximum(np.floor((starts - t_begin) / step + _FLOOR_SLACK) + 1.0, 0.0)
    first_scan = t_begin + k_first * step
    scanned = (first_scan < ends) & (first_scan < t_end)

    kept: List[int] = []
    kept_starts: List[float] = []
    for i in np.lexsort((starts, kidx, -corrs)):
        if not scanned[i]:
            continue
        j = bisect.bisect_right(kept_starts, starts[i])
        if j > 0 and ends[kept[j - 1]] > starts[i]:
            continue
        if j < len(kept) and kept_starts[j] < ends[i]:
            continue
        kept.insert(j, int(i))
        kept_starts.insert(j, float(starts[i]))
    logger.debug(f"kept {len(kept)} of {len(candidates)} candidates")
    return [candidates[i] for i in kept]


def detect_multi(trace: RssiTrace, cfg: DetectionConfig) -> List[BlockageEvent]:
    """Most likely blockage events over the whole template bank, non-overlapping and time-ordered."""
    candidates: List[BlockageEvent] = []
    for k, w in enumerate(cfg.templates, start=1):
        candidates.extend(detect_single(trace, w, cfg, template_index=k))
    step = cfg.scan_step or trace.sample_interval
    events = resolve_candidates(candidates, trace.start_time, trace.end_time, step)
    logger.info(f"🔎 Resolved {len(events)} blockage events from {len(candidates)} candidates over {len(cfg.templates)} templates")
    return events


def event_sections(events: Sequence[BlockageEvent], origin: float, horizon: float) -> SectionSet:
    """Estimated blockage sections T^sec, relative to origin and clipped to [0, horizon]."""
    return SectionSet(intervals=[(e.t_start - origin, e.t_end - origin) for e in events], horizon=horizon)
