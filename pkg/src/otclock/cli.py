"""Command-line front end.

Subcommands: ``simulate`` (ODE trace or SSA run/ensemble), ``analyze``
(distribution / query / phase over previously written outputs),
``fixed-points`` and ``dme`` (mutational sweep).  Every run writes a
``run_manifest.json`` with the fully resolved configuration; feeding the
manifest back through ``--config`` re-runs the command bit-identically.
Flags override config-file values.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O
error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import secrets
import sys
from pathlib import Path

import numpy as np

from . import __version__, light as lt
from .analysis import (Globally, Predicate, EventuallyAt, distribution_surface,
                       estimate, sweep_query)
from .ensemble import Ensemble
from .errors import ClockError, ModelError, ModelParseError
from .modelfile import parse_network_file
from .network import builtin_ostreococcus
from .ode import OdeConfig, integrate
from .phase import PhaseConfig, detect_phases, write_phases_csv
from .robustness import MutationSpec, bin_factor_vs_phase, bins_to_csv, run_sweep
from .ssa import SsaConfig, simulate, simulate_ensemble
from .steady import locate_clock_fixed_points, report_text
from .trace import fmt, trace_from_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


class ConfigError(Exception):
    pass


def _parse_light(tokens):
    """DD | LL | LD DAWN DUSK | LL-DD [SWITCH_T]."""
    if not tokens:
        raise ConfigError("missing light protocol")
    kind = tokens[0].upper()
    if kind == "DD":
        return lt.ConstantDark()
    if kind == "LL":
        return lt.ConstantLight()
    if kind == "LD":
        if len(tokens) != 3:
            raise ConfigError("LD needs dawn and dusk hours: --light LD 6 18")
        dawn, dusk = float(tokens[1]), float(tokens[2])
        if not dawn < dusk:
            raise ConfigError(
                f"LD protocol needs t_dawn < t_dusk, got dawn={dawn:g} "
                f"dusk={dusk:g}")
        try:
            return lt.Periodic(dawn, dusk)
        except ValueError as e:
            raise ConfigError(str(e)) from e
    if kind in ("LL-DD", "LLDD"):
        switch = float(tokens[1]) if len(tokens) > 1 else 160.0
        return lt.Transfer(lt.ConstantLight(), switch, lt.ConstantDark())
    raise ConfigError(f"unknown light protocol {tokens[0]!r}")


def _load_model(source, omega):
    if source == "builtin":
        net = builtin_ostreococcus()
    else:
        net = parse_network_file(source)
    if omega is not None:
        net = net.rescale(omega)
    return net


def _resolve(args, config_keys):
    """Merge a --config JSON file with command-line flags (flags win)."""
    merged = {}
    if getattr(args, "config", None):
        with open(args.config) as f:
            data = json.load(f)
        merged.update(data.get("config", data))
    for key in config_keys:
        val = getattr(args, key.replace("-", "_"), None)
        if val is not None:
            merged[key] = val
    return merged


def _outdir(merged):
    out = Path(merged.get("out") or os.environ.get("OTCLOCK_OUT", "otclock-out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _pick_seed(merged):
    seed = merged.get("seed")
    if seed is None:
        seed = secrets.randbits(63)
        print(f"seed: {seed} (chosen fresh; pass --seed {seed} to reproduce)")
    return int(seed)


def _write_manifest(outdir, command, merged):
    manifest = {"command": command, "tool": "otclock", "version": __version__,
                "config": merged}
    with open(outdir / "run_manifest.json", "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


# -- simulate ----------------------------------------------------------------

_SIM_KEYS = ("model", "omega", "light", "engine", "t_end", "grid", "seed",
             "runs", "method", "light_mode", "tick_rate", "rel_tol", "abs_tol",
             "max_step", "retain_traces", "record_events", "threads", "out")


def cmd_simulate(args):
    merged = _resolve(args, _SIM_KEYS)
    merged.setdefault("model", "builtin")
    merged.setdefault("engine", "ode")
    merged.setdefault("grid", 0.1)
    if "t_end" not in merged:
        raise ConfigError("t_end: missing (--t-end)")
    sched = _parse_light(list(map(str, merged.get("light", ["LD", "6", "18"]))))
    net = _load_model(merged["model"], merged.get("omega"))
    outdir = _outdir(merged)

    if merged["engine"] == "ode":
        cfg = OdeConfig(rel_tol=merged.get("rel_tol", 1e-6),
                        abs_tol=merged.get("abs_tol", 1e-9),
                        max_step=merged.get("max_step", math.inf),
                        output_grid=merged["grid"])
        trace = integrate(net, sched, merged["t_end"], cfg)
        trace.to_csv(outdir / "trace.csv")
        print(f"wrote {outdir / 'trace.csv'} ({len(trace.times)} rows)")
    elif merged["engine"] == "ssa":
        merged["seed"] = _pick_seed(merged)
        runs = int(merged.get("runs", 1))
        cfg = SsaConfig(t_end=merged["t_end"], seed=merged["seed"],
                        method=merged.get("method", "direct"),
                        light_mode=merged.get("light_mode", "switch"),
                        tick_rate=merged.get("tick_rate", 60.0),
                        record_grid=merged["grid"],
                        retain_traces=bool(merged.get("retain_traces", False)),
                        record_events=bool(merged.get("record_events", False)))
        if runs <= 1:
            res = simulate(net, sched, cfg)
            res.trace.to_csv(outdir / "trace.csv")
            print(f"wrote {outdir / 'trace.csv'} ({res.event_count} events"
                  f"{', absorbed' if res.absorbed else ''})")
        else:
            ens = simulate_ensemble(net, sched, cfg, runs, merged["seed"],
                                    threads=merged.get("threads"))
            ens.stats_to_csv(outdir / "ensemble_stats.csv")
            ens.save(outdir / "ensemble.bin")
            print(f"wrote {outdir / 'ensemble_stats.csv'} and "
                  f"{outdir / 'ensemble.bin'} ({runs} runs)")
    else:
        raise ConfigError(f"engine: unknown engine {merged['engine']!r}")
    _write_manifest(outdir, "simulate", merged)
    return EXIT_OK


# -- analyze -----------------------------------------------------------------

def cmd_analyze_distribution(args):
    keys = ("ensemble", "obs", "t", "levels", "out")
    merged = _resolve(args, keys)
    for k in ("ensemble", "obs", "t", "levels"):
        if merged.get(k) is None:
            raise ConfigError(f"{k}: missing")
    outdir = _outdir(merged)
    ens = Ensemble.load(merged["ensemble"])
    t0, t1 = map(float, merged["t"])
    lo, hi = map(int, merged["levels"])
    surf = distribution_surface(ens, merged["obs"], t0, t1, lo, hi)
    surf.to_csv(outdir / "distribution.csv", outdir / "moments.csv")
    print(f"wrote {outdir / 'distribution.csv'} and {outdir / 'moments.csv'}")
    _write_manifest(outdir, "analyze distribution", merged)
    return EXIT_OK


def _parse_range(spec):
    """'0:20:2' or '0..20:2' or a comma list -> list of numbers."""
    spec = str(spec)
    if "," in spec:
        return [float(x) for x in spec.split(",")]
    body = spec.replace("..", ":")
    parts = body.split(":")
    if len(parts) == 1:
        return [float(parts[0])]
    lo, hi = float(parts[0]), float(parts[1])
    step = float(parts[2]) if len(parts) > 2 else 1.0
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [lo + k * step for k in range(n)]


def cmd_analyze_query(args):
    keys = ("ensemble", "obs", "globally", "eventually", "le", "ge", "eq",
            "ci", "mode", "out")
    merged = _resolve(args, keys)
    for k in ("ensemble", "obs"):
        if merged.get(k) is None:
            raise ConfigError(f"{k}: missing")
    outdir = _outdir(merged)
    ens = Ensemble.load(merged["ensemble"])
    ci = merged.get("ci", "normal")
    mode = merged.get("mode", "events")

    comparison, values = None, None
    for flag, comp in (("le", "<="), ("ge", ">="), ("eq", "==")):
        if merged.get(flag) is not None:
            comparison, values = comp, _parse_range(merged[flag])
    if comparison is None:
        raise ConfigError("one of --le/--ge/--eq is required")

    if merged.get("globally") is not None:
        t1, t2 = map(float, merged["globally"])
        template = Globally(t1, t2, Predicate(merged["obs"], comparison, values[0]))
    elif merged.get("eventually") is not None:
        template = EventuallyAt(float(merged["eventually"]),
                                Predicate(merged["obs"], comparison, values[0]))
    else:
        raise ConfigError("one of --globally/--eventually is required")

    rows = sweep_query(ens, template, values, ci=ci, mode=mode)
    path = outdir / "queries.csv"
    import csv

    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["param", "p_hat", "ci_half_width", "n"])
        for b, est in rows:
            w.writerow([fmt(b), fmt(est.p_hat), fmt(est.ci_half_width), est.n])
    print(f"wrote {path}")
    _write_manifest(outdir, "analyze query", merged)
    return EXIT_OK


def cmd_analyze_phase(args):
    keys = ("trace", "obs", "low", "high", "window", "period", "out")
    merged = _resolve(args, keys)
    for k in ("trace", "obs"):
        if merged.get(k) is None:
            raise ConfigError(f"{k}: missing")
    outdir = _outdir(merged)
    trace = trace_from_csv(merged["trace"])
    window = merged.get("window") or (trace.times[0], trace.times[-1])
    cfg = PhaseConfig(low_frac=merged.get("low", 0.20),
                      high_frac=merged.get("high", 0.35),
                      t_start=float(window[0]), t_end=float(window[1]),
                      period=merged.get("period", 24.0))
    res = detect_phases(trace, merged["obs"], cfg)
    write_phases_csv(outdir / "phases.csv", [res])
    print(f"wrote {outdir / 'phases.csv'} ({res.n_cycles} cycles)")
    _write_manifest(outdir, "analyze phase", merged)
    return EXIT_OK


# -- fixed-points ------------------------------------------------------------

def cmd_fixed_points(args):
    keys = ("model", "omega", "tol", "out")
    merged = _resolve(args, keys)
    merged.setdefault("model", "builtin")
    net = _load_model(merged["model"], merged.get("omega"))
    outdir = _outdir(merged)
    fps = locate_clock_fixed_points(net, tol=merged.get("tol", 1e-10))
    text = report_text(net, fps)
    (outdir / "fixed_points.txt").write_text(text)
    import csv

    with open(outdir / "fixed_points.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["light", "classification", "residual",
                    *net.species_names, "eig_re", "eig_im"])
        for light in sorted(fps):
            fp = fps[light]
            for ev in fp.eigenvalues:
                w.writerow([light, fp.classification.value, fmt(fp.residual),
                            *(fmt(x) for x in fp.state),
                            fmt(ev.real), fmt(ev.imag)])
    print(text)
    _write_manifest(outdir, "fixed-points", merged)
    return EXIT_OK


# -- dme ---------------------------------------------------------------------

def cmd_dme(args):
    keys = ("model", "mode", "mutants", "wildtype", "seed", "bins", "t_end",
            "grid", "light", "factor_range", "threads", "out")
    merged = _resolve(args, keys)
    merged.setdefault("model", "builtin")
    merged.setdefault("mode", "single-cell")
    merged.setdefault("mutants", 10000)
    merged.setdefault("wildtype", merged["mutants"] or 10000)
    merged.setdefault("bins", 10)
    merged.setdefault("t_end", 240.0)
    merged["seed"] = _pick_seed(merged)
    net = _load_model(merged["model"], merged.get("omega"))
    sched = _parse_light(list(map(str, merged.get("light", ["LD", "6", "18"]))))
    outdir = _outdir(merged)

    frange = merged.get("factor_range") or (0.5, 1.5)
    spec = MutationSpec(n_mutants=int(merged["mutants"]),
                        factor_low=float(frange[0]), factor_high=float(frange[1]))
    result = run_sweep(net, sched, spec, merged["mode"],
                       n_wildtype=int(merged["wildtype"]),
                       base_seed=merged["seed"], t_end=float(merged["t_end"]),
                       record_grid=merged.get("grid", 0.1),
                       threads=merged.get("threads"))
    result.to_csv(outdir / "dme_records.csv")
    if spec.n_mutants:
        bins = bin_factor_vs_phase(result, int(merged["bins"]))
        bins_to_csv(outdir / "dme_bins.csv", bins)
    print(f"wrote {outdir / 'dme_records.csv'} "
          f"({len(result.records)} records, {result.failure_count()} failed)")
    _write_manifest(outdir, "dme", merged)
    return EXIT_OK


# -- wiring --------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="otclock",
                                description="circadian clock network simulator")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="cmd", required=True)

    sim = sub.add_parser("simulate", help="run the ODE or SSA engine")
    sim.add_argument("--config")
    sim.add_argument("--model")
    sim.add_argument("--omega", type=float)
    sim.add_argument("--light", nargs="+")
    sim.add_argument("--engine", choices=("ode", "ssa"))
    sim.add_argument("--t-end", type=float)
    sim.add_argument("--grid", type=float)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--runs", type=int)
    sim.add_argument("--method", choices=("direct", "next-reaction"))
    sim.add_argument("--light-mode", choices=("switch", "stochastic-clock"))
    sim.add_argument("--tick-rate", type=float)
    sim.add_argument("--rel-tol", type=float)
    sim.add_argument("--abs-tol", type=float)
    sim.add_argument("--max-step", type=float)
    sim.add_argument("--retain-traces", action="store_const", const=True)
    sim.add_argument("--record-events", action="store_const", const=True)
    sim.add_argument("--threads", type=int)
    sim.add_argument("--out")
    sim.set_defaults(fn=cmd_simulate)

    an = sub.add_parser("analyze", help="analyze simulation outputs")
    ansub = an.add_subparsers(dest="what", required=True)

    dist = ansub.add_parser("distribution")
    dist.add_argument("--config")
    dist.add_argument("--ensemble")
    dist.add_argument("--obs")
    dist.add_argument("--t", nargs=2, type=float)
    dist.add_argument("--levels", nargs=2, type=int)
    dist.add_argument("--out")
    dist.set_defaults(fn=cmd_analyze_distribution)

    q = ansub.add_parser("query")
    q.add_argument("--config")
    q.add_argument("--ensemble")
    q.add_argument("--obs")
    q.add_argument("--globally", nargs=2, type=float)
    q.add_argument("--eventually", type=float)
    q.add_argument("--le")
    q.add_argument("--ge")
    q.add_argument("--eq")
    q.add_argument("--ci", choices=("normal", "wilson"))
    q.add_argument("--mode", choices=("events", "grid"))
    q.add_argument("--out")
    q.set_defaults(fn=cmd_analyze_query)

    ph = ansub.add_parser("phase")
    ph.add_argument("--config")
    ph.add_argument("--trace")
    ph.add_argument("--obs")
    ph.add_argument("--low", type=float)
    ph.add_argument("--high", type=float)
    ph.add_argument("--window", nargs=2, type=float)
    ph.add_argument("--period", type=float)
    ph.add_argument("--out")
    ph.set_defaults(fn=cmd_analyze_phase)

    fp = sub.add_parser("fixed-points", help="locate and classify fixed points")
    fp.add_argument("--config")
    fp.add_argument("--model")
    fp.add_argument("--omega", type=float)
    fp.add_argument("--tol", type=float)
    fp.add_argument("--out")
    fp.set_defaults(fn=cmd_fixed_points)

    dme = sub.add_parser("dme", help="distribution-of-mutational-effects sweep")
    dme.add_argument("--config")
    dme.add_argument("--model")
    dme.add_argument("--mode", choices=("single-cell", "mean", "mean-ssa"))
    dme.add_argument("--mutants", type=int)
    dme.add_argument("--wildtype", type=int)
    dme.add_argument("--seed", type=int)
    dme.add_argument("--bins", type=int)
    dme.add_argument("--t-end", type=float)
    dme.add_argument("--grid", type=float)
    dme.add_argument("--light", nargs="+")
    dme.add_argument("--factor-range", nargs=2, type=float)
    dme.add_argument("--threads", type=int)
    dme.add_argument("--out")
    dme.set_defaults(fn=cmd_dme)

    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ModelParseError, ModelError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO
    except ClockError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
