"""Deterministic continuous approximation of a reaction network.

Integrates dX/dt = S^T r(X, light(t)) with an adaptive Dormand-Prince 5(4)
pair under PI step control.  Light is piecewise constant, so steps are
truncated at the precomputed dawn/dusk/transfer instants and the right-hand
side stays smooth inside each span; output is sampled from the pair's
4th-order dense interpolant on a uniform grid.

States are real vectors and may be non-integer; they are floored only for
display, never internally.  A component dipping below -1e-9 aborts the
integration; smaller undershoot is clamped to 0 on output only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import codegen, light as lt
from .errors import IntegrationFailure, RateEvaluationError
from .trace import Trace, make_grid

UNDERSHOOT_TOL = 1e-9


@dataclass
class OdeConfig:
    rel_tol: float = 1e-6
    abs_tol: float = 1e-9
    initial_step: float = 0.0  # 0 selects the step automatically
    max_step: float = np.inf
    output_grid: float = 0.1
    jit: bool | None = None

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be > 0")
        if self.max_step <= 0:
            raise ValueError("max_step must be > 0")
        if self.output_grid <= 0:
            raise ValueError("output_grid must be > 0")


def rhs(net, state, light, compiled=None):
    """Net drift at a state: stoichiometry-weighted sum of all rate laws."""
    if compiled is None:
        compiled = codegen.compile_network(net)
    out = compiled.rhs_vector(np.asarray(state, dtype=float), light,
                              net.param_vector)
    if not np.all(np.isfinite(out)):
        raise RateEvaluationError("<rhs>", out[~np.isfinite(out)][0],
                                  "non-finite derivative")
    return out


def integrate(net, sched, t_end, cfg=None, y0=None):
    """Integrate the network under a light schedule over [0, t_end] hours."""
    if t_end <= 0:
        raise ValueError("t_end must be > 0")
    cfg = cfg or OdeConfig()
    compiled = codegen.compile_network(net, jit=cfg.jit)
    grid = make_grid(t_end, cfg.output_grid)
    seg_bounds, seg_light = lt.segments(sched, t_end)

    y = (net.initial_counts.astype(np.float64) if y0 is None
         else np.array(y0, dtype=np.float64))
    out = np.empty((len(grid), len(net.species)))
    iof = np.zeros(2)
    ioi = np.zeros(2, dtype=np.int64)
    status = compiled.integrate_dp54(
        y, net.param_vector, seg_bounds, seg_light, grid, out,
        float(cfg.rel_tol), float(cfg.abs_tol), float(cfg.initial_step),
        float(cfg.max_step), iof, ioi)

    if status == codegen.STATUS_RATE_ERROR:
        raise RateEvaluationError("<rhs>", float("nan"),
                                  f"non-finite derivative at t={iof[0]:.6g} h")
    if status == codegen.STATUS_STEP_FAILURE:
        raise IntegrationFailure(iof[0])
    if status == codegen.STATUS_NEGATIVE_STATE:
        raise IntegrationFailure(
            iof[0], f"state undershot below -{UNDERSHOOT_TOL:g}")

    # tiny negative excursions within tolerance are clamped on output only
    np.clip(out, 0.0, None, out=out)
    return Trace(times=grid, states=out, species=net.species_names,
                 observables=dict(net.observables))
