"""Statistical model-checking over trace ensembles.

Supported queries are time-bounded probability estimates over observables:

* ``EventuallyAt(T, pred)`` — probability that the predicate holds at time T
  (right-continuous state at T);
* ``Globally(t1, t2, pred)`` — probability that the predicate holds at every
  instant of [t1, t2].

``Globally`` is evaluated on the event-exact path replayed from the per-run
event log, so excursions between recording-grid points are never missed; a
``grid`` evaluation mode over the sampled trace exists for comparison and can
only under-count violations.  Estimates carry a 95% confidence half-width
(normal approximation by default, Wilson interval on request).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidQueryError

COMPARISONS = ("==", "<=", ">=", "<", ">")


@dataclass(frozen=True)
class Predicate:
    observable: str
    comparison: str
    bound: float

    def __post_init__(self):
        if self.comparison not in COMPARISONS:
            raise InvalidQueryError(f"unknown comparison {self.comparison!r}")


@dataclass(frozen=True)
class EventuallyAt:
    T: float
    pred: Predicate

    def __post_init__(self):
        if self.T < 0:
            raise InvalidQueryError("T must be >= 0")


@dataclass(frozen=True)
class Globally:
    t1: float
    t2: float
    pred: Predicate

    def __post_init__(self):
        if not (0 <= self.t1 < self.t2):
            raise InvalidQueryError("need 0 <= t1 < t2")


@dataclass(frozen=True)
class DistributionAt:
    T: float
    observable: str
    level_lo: int
    level_hi: int


@dataclass(frozen=True)
class Estimate:
    p_hat: float
    n: int
    ci_half_width: float


def _check_observable(ensemble, name):
    if name not in ensemble.columns:
        raise InvalidQueryError(f"unknown observable {name!r}")


def _ci_half_width(p, n, method):
    if method == "normal":
        return 1.96 * np.sqrt(max(p * (1.0 - p), 0.0) / n)
    if method == "wilson":
        z = 1.96
        denom = 1.0 + z * z / n
        center = (p + z * z / (2 * n)) / denom
        half = (z / denom) * np.sqrt(p * (1.0 - p) / n + z * z / (4 * n * n))
        # the Wilson interval is not centered on p_hat; report the half width
        # that makes [p_hat - hw, p_hat + hw] cover it
        return max(p - (center - half), (center + half) - p)
    raise ValueError(f"unknown CI method {method!r}")


def _holds(values, comparison, bound):
    if comparison == "==":
        return values == bound
    if comparison == "<=":
        return values <= bound
    if comparison == ">=":
        return values >= bound
    if comparison == "<":
        return values < bound
    return values > bound


def _replay_observable(ensemble, name):
    """Per-run event-exact piecewise-constant observable paths.

    Yields (times, values) where values[k] is the observable after event k;
    the value before the first event is the initial one.  Light-toggle
    markers (rid < 0) change nothing and are dropped.
    """
    if ensemble.events is None:
        raise InvalidQueryError(
            "query needs event-exact paths; simulate with record_events=True")
    net = ensemble.network
    v = net.series_vector(name)
    d_obs = net.stoich.astype(np.float64) @ v
    init = float(net.initial_counts @ v)
    for times, rids in ensemble.events:
        mask = rids >= 0
        tt = times[mask]
        vals = init + np.cumsum(d_obs[rids[mask].astype(np.int64)])
        yield init, tt, vals


def _window_extrema(ensemble, name, t1, t2):
    """(min, max) of the event-exact observable over [t1, t2], per run."""
    n = ensemble.n_runs
    lo = np.empty(n)
    hi = np.empty(n)
    for i, (init, tt, vals) in enumerate(_replay_observable(ensemble, name)):
        i0 = np.searchsorted(tt, t1, side="right")
        i1 = np.searchsorted(tt, t2, side="right")
        entering = vals[i0 - 1] if i0 > 0 else init
        if i1 > i0:
            w = vals[i0:i1]
            lo[i] = min(entering, w.min())
            hi[i] = max(entering, w.max())
        else:
            lo[i] = hi[i] = entering
    return lo, hi


def _values_at(ensemble, name, T, sample):
    """Per-run observable value at time T (right-continuous)."""
    if sample == "events" and ensemble.events is not None:
        out = np.empty(ensemble.n_runs)
        for i, (init, tt, vals) in enumerate(_replay_observable(ensemble, name)):
            k = np.searchsorted(tt, T, side="right")
            out[i] = vals[k - 1] if k > 0 else init
        return out
    if ensemble.traces is None:
        raise InvalidQueryError(
            "query needs retained traces; simulate with retain_traces=True")
    grid = ensemble.grid
    if T < grid[0] - 1e-9 or T > grid[-1] + 1e-9:
        raise InvalidQueryError(f"T={T:g} lies outside the simulated horizon "
                                f"[{grid[0]:g}, {grid[-1]:g}]")
    idx = int(np.searchsorted(grid, T + 1e-9) - 1)
    idx = max(idx, 0)
    return ensemble.observable_values(name)[:, idx]


def estimate(ensemble, query, ci="normal", mode="events"):
    """Estimate a probabilistic query over the ensemble.

    ``mode`` selects event-exact ("events") or sampled-grid ("grid")
    evaluation for Globally queries.
    """
    if isinstance(query, DistributionAt):
        raise InvalidQueryError("use distribution_surface for DistributionAt")
    n = ensemble.n_runs
    pred = query.pred
    _check_observable(ensemble, pred.observable)

    if isinstance(query, EventuallyAt):
        if query.T > ensemble.grid[-1] + 1e-9:
            raise InvalidQueryError(
                f"T={query.T:g} beyond horizon {ensemble.grid[-1]:g}")
        sample = "events" if (mode == "events" and ensemble.events is not None) \
            else "grid"
        values = _values_at(ensemble, pred.observable, query.T, sample)
        sat = _holds(values, pred.comparison, pred.bound)
    elif isinstance(query, Globally):
        if query.t2 > ensemble.grid[-1] + 1e-9:
            raise InvalidQueryError(
                f"t2={query.t2:g} beyond horizon {ensemble.grid[-1]:g}")
        if mode == "events":
            lo, hi = _window_extrema(ensemble, pred.observable, query.t1, query.t2)
            sat = _extrema_satisfy(lo, hi, pred)
        elif mode == "grid":
            if ensemble.traces is None:
                raise InvalidQueryError("grid mode needs retained traces")
            obs = ensemble.observable_values(pred.observable)
            g = ensemble.grid
            cols = (g >= query.t1 - 1e-9) & (g <= query.t2 + 1e-9)
            sat = _holds(obs[:, cols], pred.comparison, pred.bound).all(axis=1)
        else:
            raise ValueError(f"unknown evaluation mode {mode!r}")
    else:
        raise InvalidQueryError(f"unknown query {query!r}")

    p = float(np.mean(sat))
    return Estimate(p_hat=p, n=n, ci_half_width=float(_ci_half_width(p, n, ci)))


def _extrema_satisfy(lo, hi, pred):
    c, b = pred.comparison, pred.bound
    if c == "<=":
        return hi <= b
    if c == "<":
        return hi < b
    if c == ">=":
        return lo >= b
    if c == ">":
        return lo > b
    return (lo == b) & (hi == b)


def sweep_query(ensemble, template, bounds, ci="normal", mode="events"):
    """Instantiate ``template`` at each bound and estimate all of them.

    Globally templates with a <=/< comparison are answered in a single pass:
    the per-run window maximum is computed once and compared against every
    bound.  Returns a list of (bound, Estimate), non-decreasing in the bound
    for <= sweeps by construction.
    """
    bounds = list(bounds)
    if not bounds:
        return []
    n = ensemble.n_runs
    if (isinstance(template, Globally) and mode == "events"
            and template.pred.comparison in ("<=", "<")):
        _check_observable(ensemble, template.pred.observable)
        _, hi = _window_extrema(ensemble, template.pred.observable,
                                template.t1, template.t2)
        out = []
        for b in bounds:
            sat = hi <= b if template.pred.comparison == "<=" else hi < b
            p = float(np.mean(sat))
            out.append((b, Estimate(p, n, float(_ci_half_width(p, n, ci)))))
        return out
    out = []
    for b in bounds:
        q = replace(template, pred=replace(template.pred, bound=b))
        out.append((b, estimate(ensemble, q, ci=ci, mode=mode)))
    return out


@dataclass
class DistributionSurface:
    """Empirical level distribution per time column, plus moment curves.

    ``probs[l, k]`` is the probability of level ``levels[l]`` at ``times[k]``;
    the last row is an overflow bucket for values outside [level_lo, level_hi]
    so every column sums to 1.  ``cv`` is NaN where the mean is below 1e-9
    (``cv_valid`` False).
    """

    observable: str
    times: np.ndarray
    levels: np.ndarray
    probs: np.ndarray    # (len(levels) + 1, len(times)); last row = overflow
    mu: np.ndarray
    sigma: np.ndarray
    cv: np.ndarray
    cv_valid: np.ndarray

    def to_csv(self, surface_path, moments_path):
        import csv

        from .trace import fmt

        with open(surface_path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["level", *(fmt(t) for t in self.times)])
            for li, level in enumerate(self.levels):
                w.writerow([int(level), *(fmt(x) for x in self.probs[li])])
            w.writerow(["overflow", *(fmt(x) for x in self.probs[-1])])
        with open(moments_path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["time_h", "mu", "sigma", "cv"])
            for k in range(len(self.times)):
                cv = fmt(self.cv[k]) if self.cv_valid[k] else "NA"
                w.writerow([fmt(self.times[k]), fmt(self.mu[k]),
                            fmt(self.sigma[k]), cv])


def distribution_surface(ensemble, observable, t_start, t_end, level_lo,
                         level_hi):
    """Time-dependent empirical distribution of an observable.

    Needs retained traces.  Levels outside [level_lo, level_hi] fall into the
    overflow bucket; mu/sigma/cv come from the raw (unbinned) samples.
    """
    if ensemble.n_runs < 1:
        raise ValueError("empty ensemble")
    _check_observable(ensemble, observable)
    if level_hi < level_lo:
        raise ValueError("need level_lo <= level_hi")
    obs = ensemble.observable_values(observable)  # needs traces
    g = ensemble.grid
    cols = np.nonzero((g >= t_start - 1e-9) & (g <= t_end + 1e-9))[0]
    if len(cols) == 0:
        raise ValueError("no grid points inside the requested window")
    times = g[cols]
    window = obs[:, cols]
    n = ensemble.n_runs

    levels = np.arange(int(level_lo), int(level_hi) + 1)
    nl = len(levels)
    probs = np.zeros((nl + 1, len(cols)))
    shifted = np.rint(window).astype(np.int64) - int(level_lo)
    for k in range(len(cols)):
        col = shifted[:, k]
        ok = (col >= 0) & (col < nl)
        counts = np.bincount(col[ok], minlength=nl)
        probs[:nl, k] = counts / n
        probs[nl, k] = np.count_nonzero(~ok) / n

    mu = window.mean(axis=0)
    sigma = window.std(axis=0)
    valid = mu >= 1e-9
    cv = np.full_like(mu, np.nan)
    np.divide(sigma, mu, out=cv, where=valid)
    return DistributionSurface(observable=observable, times=times,
                               levels=levels, probs=probs, mu=mu, sigma=sigma,
                               cv=cv, cv_valid=valid)
