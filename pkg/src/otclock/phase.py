"""Dual-threshold (hysteresis) peak and trough detection for noisy
oscillatory traces, with circadian phase summaries.

A Schmitt trigger segments the signal: the state flips HIGH when the signal
exceeds ``min + high_frac * range`` and LOW when it drops below
``min + low_frac * range``, where the range is taken over the configured
analysis window of the analyzed trace itself.  Each maximal HIGH segment
contributes one peak (argmax, earliest sample on ties), each LOW segment one
trough (argmin).  Noise excursions smaller than the hysteresis band can never
produce a cycle.

Peak phases are reduced modulo the period (default 24 h) and summarized with
circular statistics, so peaks near midnight do not average to noon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class PhaseConfig:
    low_frac: float = 0.20
    high_frac: float = 0.35
    t_start: float = 0.0
    t_end: float = 240.0  # 10 days
    period: float = 24.0
    smooth_window: int = 0  # odd sample count for an optional moving average

    def __post_init__(self):
        if not (0.0 < self.low_frac < self.high_frac < 1.0):
            raise ValueError("need 0 < low_frac < high_frac < 1")
        if self.t_end <= self.t_start:
            raise ValueError("need t_end > t_start")
        if self.period <= 0:
            raise ValueError("period must be > 0")


@dataclass(frozen=True)
class Cycle:
    peak_time: float
    peak_value: float
    trough_time: float  # NaN when the window opens inside a HIGH segment
    trough_value: float


@dataclass
class PhaseResult:
    cycles: list
    peak_phases: np.ndarray
    mean_phase: float
    circular_sd: float
    resultant: float  # mean resultant length R in [0, 1]
    config: PhaseConfig = field(repr=False, default=None)

    @property
    def n_cycles(self):
        return len(self.cycles)

    @property
    def peak_times(self):
        return np.asarray([c.peak_time for c in self.cycles])


def circular_stats(phases, period=24.0):
    """(mean, sd, R) of phases living on a circle of the given period.

    The SD is sqrt(-2 ln R) mapped back to the period's units; a point mass
    gives sd 0, a uniform spread gives R ~ 0 and a large sd.
    """
    phases = np.asarray(phases, dtype=float)
    if len(phases) == 0:
        return math.nan, math.nan, math.nan
    ang = phases * (2.0 * math.pi / period)
    c = np.cos(ang).mean()
    s = np.sin(ang).mean()
    r = math.hypot(c, s)
    mean = math.atan2(s, c) * period / (2.0 * math.pi) % period
    if r >= 1.0:
        sd = 0.0
    elif r <= 0.0:
        sd = math.inf
    else:
        sd = math.sqrt(-2.0 * math.log(r)) * period / (2.0 * math.pi)
    return mean, sd, r


def circular_difference(a, b, period=24.0):
    """Signed shortest distance a - b on the circle, in (-period/2, period/2]."""
    d = (a - b) % period
    if d > period / 2:
        d -= period
    return d


def detect_phases(trace, observable, cfg=None):
    """Hysteresis cycle detection on one observable of a trace."""
    cfg = cfg or PhaseConfig()
    values = trace.series(observable)
    return detect_phases_values(trace.times, values, cfg)


def detect_phases_values(times, values, cfg):
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times[0] > cfg.t_start + 1e-9 or times[-1] < cfg.t_end - 1e-9:
        raise ValueError(
            f"trace [{times[0]:g}, {times[-1]:g}] does not span the analysis "
            f"window [{cfg.t_start:g}, {cfg.t_end:g}]")
    sel = (times >= cfg.t_start - 1e-12) & (times <= cfg.t_end + 1e-12)
    t = times[sel]
    v = values[sel]
    if cfg.smooth_window > 1:
        k = cfg.smooth_window
        kernel = np.ones(k) / k
        pad = k // 2
        vp = np.pad(v, pad, mode="edge")
        v = np.convolve(vp, kernel, mode="valid")[: len(t)]

    vmin = float(v.min())
    vmax = float(v.max())
    rng = vmax - vmin
    if rng <= 0.0:
        # flat signal: no oscillation, by contract not an error
        return PhaseResult([], np.empty(0), math.nan, math.nan, math.nan, cfg)
    low = vmin + cfg.low_frac * rng
    high = vmin + cfg.high_frac * rng

    # Schmitt trigger walk.  State starts HIGH/LOW if the first sample is
    # decisive, otherwise PENDING until the first threshold crossing; pending
    # samples precede any segment and contribute no peak or trough.  Only
    # segments closed by a crossing count: a segment still in progress at the
    # window edge has not completed its excursion, so it yields no peak or
    # trough (otherwise every window ending mid-rise would mint a bogus cycle).
    HIGH, LOW, PENDING = 1, 0, -1
    if v[0] > high:
        state = HIGH
    elif v[0] < low:
        state = LOW
    else:
        state = PENDING
    seg_start = 0
    segments = []  # (state, i0, i1) inclusive sample index range, closed only
    for i in range(1, len(v)):
        if state == HIGH:
            if v[i] < low:
                segments.append((HIGH, seg_start, i - 1))
                state = LOW
                seg_start = i
        elif state == LOW:
            if v[i] > high:
                segments.append((LOW, seg_start, i - 1))
                state = HIGH
                seg_start = i
        else:
            if v[i] > high:
                state = HIGH
                seg_start = i
            elif v[i] < low:
                state = LOW
                seg_start = i

    cycles = []
    last_trough_time = math.nan
    last_trough_value = math.nan
    for st, i0, i1 in segments:
        chunk = v[i0:i1 + 1]
        if st == HIGH:
            k = i0 + int(np.argmax(chunk))  # argmax takes the earliest tie
            cycles.append(Cycle(peak_time=float(t[k]), peak_value=float(v[k]),
                                trough_time=last_trough_time,
                                trough_value=last_trough_value))
        else:
            k = i0 + int(np.argmin(chunk))
            last_trough_time = float(t[k])
            last_trough_value = float(v[k])

    phases = np.asarray([c.peak_time % cfg.period for c in cycles])
    mean, sd, r = circular_stats(phases, cfg.period)
    return PhaseResult(cycles, phases, mean, sd, r, cfg)


def write_phases_csv(path, results, run_ids=None):
    """Per-run phase CSV: run, cycle, peak/trough times and values, phase."""
    import csv

    from .trace import fmt

    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["run", "cycle", "peak_time_h", "peak_phase_h", "peak_value",
                    "trough_time_h", "trough_value"])
        for ri, res in enumerate(results):
            rid = run_ids[ri] if run_ids is not None else ri
            for ci, c in enumerate(res.cycles):
                w.writerow([rid, ci, fmt(c.peak_time),
                            fmt(c.peak_time % res.config.period),
                            fmt(c.peak_value),
                            "NA" if math.isnan(c.trough_time) else fmt(c.trough_time),
                            "NA" if math.isnan(c.trough_value) else fmt(c.trough_value)])
