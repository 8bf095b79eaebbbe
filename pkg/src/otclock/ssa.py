"""Exact stochastic simulation of a network as a CTMC.

Two samplers: the Direct method and the Gibson-Bruck next-reaction method
(dependency graph plus indexed priority queue).  Light enters as
piecewise-constant propensity factors; in the default ``switch`` mode a
sampled waiting time that crosses the next dawn/dusk/transfer instant is
discarded and the clock advanced to the switch, which is exact because
exponential waiting times are memoryless.  The ``stochastic-clock`` mode
instead drives light from an auxiliary minute-tick counter firing at
``tick_rate`` events/hour; light toggles when the counter reaches the dawn
and dusk hour boundaries, and no propensity reads wall-clock time.

Randomness: run ``i`` of an ensemble draws from a dedicated Philox
counter-based stream with key ``(base_seed, i)``, so any run is reproducible
from ``(base_seed, i)`` alone, independent of ensemble size, scheduling
order or thread count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import codegen, light as lt
from .ensemble import Ensemble
from .errors import RateEvaluationError
from .trace import Trace, make_grid

METHOD_DIRECT = "direct"
METHOD_NRM = "next-reaction"
LIGHT_SWITCH = "switch"
LIGHT_STOCHASTIC = "stochastic-clock"

_U_START = 1 << 14
_U_CHUNK_MAX = 1 << 20
_EV_START = 1 << 12
_CHUNK_RUNS = 32  # fixed chunk size keeps reductions independent of thread count


@dataclass
class SsaConfig:
    t_end: float
    seed: int = 0
    method: str = METHOD_DIRECT
    light_mode: str = LIGHT_SWITCH
    tick_rate: float = 60.0
    record_grid: float = 0.1
    retain_traces: bool = False
    record_events: bool = False
    jit: bool | None = None

    def __post_init__(self):
        if self.t_end <= 0:
            raise ValueError("t_end must be > 0")
        if self.tick_rate <= 0:
            raise ValueError("tick_rate must be > 0")
        if self.record_grid <= 0:
            raise ValueError("record_grid must be > 0")
        if self.method not in (METHOD_DIRECT, METHOD_NRM):
            raise ValueError(f"unknown method {self.method!r}")
        if self.light_mode not in (LIGHT_SWITCH, LIGHT_STOCHASTIC):
            raise ValueError(f"unknown light mode {self.light_mode!r}")


@dataclass
class RunResult:
    trace: Trace
    event_count: int
    seed: int
    run_index: int = 0
    absorbed: bool = False
    events: tuple | None = None  # (times, reaction indices); rid < 0 marks a light toggle


def run_stream(base_seed, run_index):
    """The documented RNG stream of run ``run_index``: Philox keyed by
    (base_seed, run_index)."""
    key = np.array([np.uint64(base_seed & 0xFFFFFFFFFFFFFFFF),
                    np.uint64(run_index)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


class _Runner:
    """Compiled kernels plus per-simulation constant arrays."""

    def __init__(self, net, sched, cfg):
        self.net = net
        self.sched = sched
        self.cfg = cfg
        self.compiled = codegen.compile_network(net, jit=cfg.jit)
        self.grid = make_grid(cfg.t_end, cfg.record_grid)

        sclock = (cfg.light_mode == LIGHT_STOCHASTIC
                  and isinstance(sched, lt.Periodic))
        if cfg.light_mode == LIGHT_STOCHASTIC and isinstance(sched, lt.Transfer):
            raise ValueError("stochastic-clock mode does not support transfer "
                             "schedules")
        if cfg.light_mode == LIGHT_STOCHASTIC and cfg.method != METHOD_DIRECT:
            raise ValueError("stochastic-clock mode requires the direct method")
        self.sclock = sclock
        if sclock:
            self.seg_bounds = np.asarray([0.0, float(cfg.t_end)])
            self.seg_light = np.asarray([0.0])  # unused; light comes from ticks
            ticks_per_hour = cfg.tick_rate
            self.opts_i = np.asarray([
                1 if cfg.record_events else 0,
                1,
                int(round(sched.t_dawn * ticks_per_hour)),
                int(round(sched.t_dusk * ticks_per_hour)),
                int(round(24.0 * ticks_per_hour)),
            ], dtype=np.int64)
        else:
            self.seg_bounds, self.seg_light = lt.segments(sched, cfg.t_end)
            self.opts_i = np.asarray(
                [1 if cfg.record_events else 0, 0, 0, 0, 1], dtype=np.int64)
        self.opts_f = np.asarray([float(cfg.tick_rate)])
        self.p = net.param_vector
        self.init = net.initial_counts.astype(np.float64)

    def run(self, base_seed, run_index):
        cfg = self.cfg
        com = self.compiled
        gen = run_stream(base_seed, run_index)
        state = self.init.copy()
        rec = np.empty((len(self.grid), com.n_species), dtype=np.int64)
        iof = np.zeros(2)
        ioi = np.zeros(codegen.IOI_LEN, dtype=np.int64)
        u = gen.random(_U_START)
        evcap = _EV_START if cfg.record_events else 1
        ev_t = np.empty(evcap)
        ev_r = np.empty(evcap, dtype=np.int16)

        if cfg.method == METHOD_NRM:
            R = com.n_reactions
            taus = np.empty(R)
            acur = np.empty(R)
            heap = np.empty(R, dtype=np.int64)
            hpos = np.empty(R, dtype=np.int64)

            def step():
                return com.run_nrm(state, self.p, com.stoich, com.dep_ptr,
                                   com.dep_idx, com.light_mask, self.seg_bounds,
                                   self.seg_light, self.grid, rec, u, iof, ioi,
                                   ev_t, ev_r, self.opts_i, taus, acur, heap, hpos)
        else:
            def step():
                return com.run_direct(state, self.p, com.stoich, self.seg_bounds,
                                      self.seg_light, self.grid, rec, u, iof, ioi,
                                      ev_t, ev_r, self.opts_i, self.opts_f)

        while True:
            status = step()
            if status == codegen.STATUS_DONE:
                break
            if status == codegen.STATUS_NEED_UNIFORMS:
                fresh = gen.random(min(max(2 * len(u), _U_START), _U_CHUNK_MAX))
                u = np.concatenate([u[ioi[codegen.IO_CURSOR]:], fresh])
                ioi[codegen.IO_CURSOR] = 0
            elif status == codegen.STATUS_NEED_EVENT_BUFFER:
                ev_t = np.concatenate([ev_t, np.empty(len(ev_t))])
                ev_r = np.concatenate([ev_r, np.empty(len(ev_r), dtype=np.int16)])
            elif status == codegen.STATUS_RATE_ERROR:
                rid = int(ioi[codegen.IO_ERR_RID])
                name = self.net.reactions[rid].id
                raise RateEvaluationError(
                    name, float("nan"),
                    f"run {run_index} at t={iof[0]:.6g} h")
            else:  # pragma: no cover - no other codes are emitted
                raise RuntimeError(f"unexpected kernel status {status}")

        evn = int(ioi[codegen.IO_EVN])
        events = ((ev_t[:evn].copy(), ev_r[:evn].copy())
                  if cfg.record_events else None)
        return rec, int(ioi[codegen.IO_NEV]), bool(ioi[codegen.IO_ABSORBED]), events


def simulate(net, sched, cfg, run_index=0):
    """One statistically exact sample path; the stream is (cfg.seed, run_index)."""
    runner = _Runner(net, sched, cfg)
    rec, nev, absorbed, events = runner.run(cfg.seed, run_index)
    trace = Trace(times=runner.grid, states=rec, species=net.species_names,
                  observables=dict(net.observables))
    return RunResult(trace=trace, event_count=nev, seed=cfg.seed,
                     run_index=run_index, absorbed=absorbed, events=events)


def _combine(stats_a, stats_b):
    """Chan pooling of (n, mean, M2); applied in fixed chunk order."""
    na, ma, m2a = stats_a
    nb, mb, m2b = stats_b
    if na == 0:
        return stats_b
    if nb == 0:
        return stats_a
    n = na + nb
    delta = mb - ma
    mean = ma + delta * (nb / n)
    m2 = m2a + m2b + delta * delta * (na * nb / n)
    return (n, mean, m2)


def simulate_ensemble(net, sched, cfg, n_runs, base_seed, threads=None):
    """n_runs independent runs; run i is fully determined by (base_seed, i).

    Statistics are accumulated per fixed-size run chunk and the chunks are
    pooled in index order, so results are byte-identical for any thread count.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    runner = _Runner(net, sched, cfg)
    T = len(runner.grid)
    S = runner.compiled.n_species
    obs_vecs = np.stack([net.observable_vector(name) for name in net.observables]) \
        if net.observables else np.zeros((0, S))
    K = obs_vecs.shape[0]

    traces = None
    if cfg.retain_traces:
        traces = np.empty((n_runs, T, S), dtype=np.int32)
    events = [None] * n_runs if cfg.record_events else None
    event_counts = np.zeros(n_runs, dtype=np.int64)
    absorbed = np.zeros(n_runs, dtype=bool)

    def do_chunk(c0, c1):
        n = 0
        mean = np.zeros((T, S + K))
        m2 = np.zeros((T, S + K))
        x = np.empty((T, S + K))
        for i in range(c0, c1):
            rec, nev, absd, ev = runner.run(base_seed, i)
            event_counts[i] = nev
            absorbed[i] = absd
            if traces is not None:
                traces[i] = rec
            if events is not None:
                events[i] = ev
            x[:, :S] = rec
            if K:
                x[:, S:] = rec @ obs_vecs.T
            n += 1
            delta = x - mean
            mean += delta / n
            m2 += delta * (x - mean)
        return n, mean, m2

    bounds = list(range(0, n_runs, _CHUNK_RUNS)) + [n_runs]
    chunk_ranges = list(zip(bounds[:-1], bounds[1:]))
    if threads is None:
        threads = min(os.cpu_count() or 1, len(chunk_ranges))
    if threads > 1 and len(chunk_ranges) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda cr: do_chunk(*cr), chunk_ranges))
    else:
        results = [do_chunk(*cr) for cr in chunk_ranges]

    total = (0, np.zeros((T, S + K)), np.zeros((T, S + K)))
    for st in results:
        total = _combine(total, st)
    n, mean, m2 = total
    sd = np.sqrt(np.maximum(m2, 0.0) / n)

    return Ensemble(network=net, schedule=sched, config=asdict(cfg),
                    grid=runner.grid, n_runs=n_runs, base_seed=base_seed,
                    mean=mean, sd=sd, event_counts=event_counts,
                    absorbed=absorbed, traces=traces, events=events)
