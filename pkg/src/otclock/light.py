"""Environmental light schedules: DD, LL, periodic LD cycles and one-shot
transfers between conditions.

``light_at`` is the pointwise definition used by queries and tests.  For a
periodic day it implements

    light(t) = H(((t mod 24) - t_dawn) * (t_dusk - (t mod 24)))

with the strict Heaviside convention H(0) = 0, so the dawn and dusk instants
themselves are dark.  The engines consume :func:`segments`, which carries the
open-interval interior value of each constant-light span; the two views agree
everywhere except on the measure-zero switch instants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DAY_HOURS = 24.0


@dataclass(frozen=True)
class ConstantDark:
    def __str__(self):
        return "DD"


@dataclass(frozen=True)
class ConstantLight:
    def __str__(self):
        return "LL"


@dataclass(frozen=True)
class Periodic:
    t_dawn: float
    t_dusk: float

    def __post_init__(self):
        if not (0.0 <= self.t_dawn < DAY_HOURS):
            raise ValueError(f"t_dawn must lie in [0, 24), got {self.t_dawn}")
        if not (self.t_dawn < self.t_dusk <= DAY_HOURS):
            raise ValueError(
                f"t_dusk must lie in (t_dawn, 24], got dawn={self.t_dawn}, "
                f"dusk={self.t_dusk}")

    def __str__(self):
        return f"LD dawn={self.t_dawn:g} dusk={self.t_dusk:g}"


@dataclass(frozen=True)
class Transfer:
    before: object
    switch_time: float
    after: object

    def __post_init__(self):
        if self.switch_time < 0.0:
            raise ValueError("switch_time must be >= 0")
        if isinstance(self.before, Transfer) or isinstance(self.after, Transfer):
            raise ValueError("transfers do not nest; use one transfer per experiment")

    def __str__(self):
        return f"{self.before} -> {self.after} at {self.switch_time:g}h"


def light_at(sched, t):
    """Light value (0 or 1) at time t >= 0 hours."""
    if t < 0.0:
        raise ValueError("t must be >= 0")
    if isinstance(sched, ConstantDark):
        return 0
    if isinstance(sched, ConstantLight):
        return 1
    if isinstance(sched, Periodic):
        tm = math.fmod(t, DAY_HOURS)
        return 1 if (tm - sched.t_dawn) * (sched.t_dusk - tm) > 0.0 else 0
    if isinstance(sched, Transfer):
        return light_at(sched.before if t < sched.switch_time else sched.after, t)
    raise TypeError(f"not a light schedule: {sched!r}")


def switch_times(sched, t_end):
    """Strictly increasing switch instants in the open interval (0, t_end)."""
    if isinstance(sched, (ConstantDark, ConstantLight)):
        return np.empty(0)
    if isinstance(sched, Periodic):
        out = []
        day = 0
        while day * DAY_HOURS < t_end:
            for b in (day * DAY_HOURS + sched.t_dawn, day * DAY_HOURS + sched.t_dusk):
                if 0.0 < b < t_end:
                    out.append(b)
            day += 1
        return np.unique(np.asarray(out))
    if isinstance(sched, Transfer):
        before = switch_times(sched.before, min(sched.switch_time, t_end))
        pieces = [before]
        if 0.0 < sched.switch_time < t_end:
            pieces.append(np.asarray([sched.switch_time]))
            after = switch_times(sched.after, t_end)
            pieces.append(after[after > sched.switch_time])
        return np.unique(np.concatenate(pieces)) if pieces else np.empty(0)
    raise TypeError(f"not a light schedule: {sched!r}")


def segments(sched, t_end):
    """Partition [0, t_end] into constant-light spans.

    Returns (bounds, values): ``bounds`` has length n+1 starting at 0 and
    ending at t_end; ``values[i]`` is the interior light value on
    (bounds[i], bounds[i+1]).
    """
    if t_end <= 0.0:
        raise ValueError("t_end must be > 0")
    sw = switch_times(sched, t_end)
    bounds = np.concatenate(([0.0], sw, [t_end]))
    mids = 0.5 * (bounds[:-1] + bounds[1:])
    values = np.asarray([float(light_at(sched, m)) for m in mids])
    return bounds, values


def to_json(sched):
    if isinstance(sched, ConstantDark):
        return {"kind": "DD"}
    if isinstance(sched, ConstantLight):
        return {"kind": "LL"}
    if isinstance(sched, Periodic):
        return {"kind": "LD", "t_dawn": sched.t_dawn, "t_dusk": sched.t_dusk}
    if isinstance(sched, Transfer):
        return {"kind": "transfer", "before": to_json(sched.before),
                "switch_time": sched.switch_time, "after": to_json(sched.after)}
    raise TypeError(f"not a light schedule: {sched!r}")


def from_json(obj):
    kind = obj.get("kind")
    if kind == "DD":
        return ConstantDark()
    if kind == "LL":
        return ConstantLight()
    if kind == "LD":
        return Periodic(float(obj["t_dawn"]), float(obj["t_dusk"]))
    if kind == "transfer":
        return Transfer(from_json(obj["before"]), float(obj["switch_time"]),
                        from_json(obj["after"]))
    raise ValueError(f"unknown light schedule kind {kind!r}")
