"""Sampled trajectories and their CSV form.

CSV layout: ``time_h``, species columns in canonical (declaration) order,
then observable columns; floats carry 17 significant digits so files
round-trip bit-exactly.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np


def fmt(x):
    if float(x).is_integer() and abs(x) < 1e15:
        return str(int(x))
    return format(float(x), ".17g")


def make_grid(t_end, dt):
    """Uniform output grid [0, t_end] with spacing dt (endpoint included)."""
    if t_end <= 0 or dt <= 0:
        raise ValueError("t_end and grid spacing must be > 0")
    n = int(round(t_end / dt))
    if abs(n * dt - t_end) > 1e-9 * max(1.0, t_end):
        n = int(np.floor(t_end / dt + 1e-9))
    return np.linspace(0.0, n * dt, n + 1)


@dataclass
class Trace:
    """Time series of the full state vector.

    ``states[k]`` is the state at ``times[k]``; SSA traces hold integer
    counts with right-continuous step semantics (the value at a grid point is
    the state immediately after the last event at or before it).
    """

    times: np.ndarray
    states: np.ndarray
    species: tuple
    observables: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times)
        self.states = np.asarray(self.states)
        if self.states.shape != (len(self.times), len(self.species)):
            raise ValueError("states must be (len(times), len(species))")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly ascending")

    def series(self, name):
        """Column for an observable or a bare species."""
        if name in self.observables:
            v = np.zeros(len(self.species))
            for coef, sp in self.observables[name]:
                v[self.species.index(sp)] += coef
            return self.states @ v
        if name in self.species:
            return self.states[:, self.species.index(name)].astype(float)
        raise KeyError(f"{name!r} is neither an observable nor a species")

    def observable(self, name):
        return self.series(name)

    def to_csv(self, path_or_buf):
        close = False
        if isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__"):
            f = open(path_or_buf, "w", newline="")
            close = True
        else:
            f = path_or_buf
        try:
            w = csv.writer(f)
            obs_names = list(self.observables)
            w.writerow(["time_h", *self.species, *obs_names])
            obs_cols = [self.series(n) for n in obs_names]
            for k in range(len(self.times)):
                row = [fmt(self.times[k])]
                row.extend(fmt(x) for x in self.states[k])
                row.extend(fmt(col[k]) for col in obs_cols)
                w.writerow(row)
        finally:
            if close:
                f.close()

    def to_csv_text(self):
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()


def trace_from_csv(path):
    """Read a trace CSV back; every non-time column becomes a plain series."""
    with open(path, "r", newline="") as f:
        rows = list(csv.reader(f))
    if not rows or rows[0][:1] != ["time_h"]:
        raise ValueError(f"{path}: not a trace CSV (missing time_h header)")
    names = tuple(rows[0][1:])
    data = np.asarray([[float(x) for x in row] for row in rows[1:]])
    return Trace(times=data[:, 0], states=data[:, 1:], species=names)
