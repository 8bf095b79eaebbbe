"""Fixed points of the deterministic system under constant light, their
Jacobian spectra and stability classification.

The search minimizes ||rhs(x)||^2 with Nelder-Mead (standard reflection /
expansion / contraction / shrink coefficients 1, 2, 0.5, 0.5), restarting
from the incumbent, then polishes with a damped projected Newton iteration.
Jacobians use central finite differences with per-coordinate steps, falling
back to a one-sided difference next to the non-negativity boundary so Hill
laws are never evaluated at negative counts.  Eigenvalues come from the
dense real solver (balancing + Hessenberg reduction + shifted QR, via
LAPACK) and are returned sorted by real part, conjugate pairs adjacent.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import codegen
from .errors import ConvergenceFailure, NumericalFailure


class Classification(str, enum.Enum):
    STABLE_NODE = "stable-node"
    STABLE_FOCUS = "stable-focus"
    UNSTABLE = "unstable"
    MARGINAL = "marginal"


@dataclass
class FixedPoint:
    light: int
    state: np.ndarray
    residual: float
    eigenvalues: np.ndarray
    classification: Classification

    def observable(self, net, name):
        return float(net.series_vector(name) @ self.state)


def _rhs_fn(net, light, compiled=None):
    compiled = compiled or codegen.compile_network(net)
    p = net.param_vector

    def f(x):
        return compiled.rhs_vector(x, light, p)

    return f


def finite_difference_jacobian(net, state, light, compiled=None):
    """J_ij = d rhs_i / d x_j, central differences with
    h_j = max(1e-6, 1e-6 |x_j|); one-sided when x_j - h_j would be negative."""
    f = _rhs_fn(net, light, compiled)
    x = np.asarray(state, dtype=float)
    n = len(x)
    J = np.empty((n, n))
    f0 = None
    for j in range(n):
        h = max(1e-6, 1e-6 * abs(x[j]))
        if x[j] - h < 0.0:
            if f0 is None:
                f0 = f(x)
            xp = x.copy()
            xp[j] += h
            J[:, j] = (f(xp) - f0) / h
        else:
            xp = x.copy()
            xm = x.copy()
            xp[j] += h
            xm[j] -= h
            J[:, j] = (f(xp) - f(xm)) / (2.0 * h)
    return J


def jacobian_eigenvalues(net, state, light, compiled=None):
    """Eigenvalues of the finite-difference Jacobian, sorted by real part
    ascending with conjugate pairs adjacent (-Im before +Im)."""
    if np.any(np.asarray(state) < 0):
        raise ValueError("state must be non-negative")
    J = finite_difference_jacobian(net, state, light, compiled)
    try:
        eig = np.linalg.eigvals(J)
    except np.linalg.LinAlgError as e:  # pragma: no cover - dgeev rarely fails
        raise NumericalFailure(f"eigenvalue iteration failed: {e}") from e
    order = np.lexsort((eig.imag, eig.real))
    return eig[order]


def classify(eigenvalues, tol=1e-9):
    """Stability class from the spectrum; |Im| < tol counts as real."""
    eig = np.asarray(eigenvalues, dtype=complex)
    re = eig.real
    if np.any(re > tol):
        return Classification.UNSTABLE
    if np.any(np.abs(re) <= tol):
        return Classification.MARGINAL
    if np.any(np.abs(eig.imag) >= tol):
        return Classification.STABLE_FOCUS
    return Classification.STABLE_NODE


def find_fixed_point(net, light, guess, tol=1e-10, max_restarts=5, polish=True):
    """Locate a non-negative fixed point of the deterministic system.

    Raises ConvergenceFailure (carrying the best residual) if the requested
    tolerance on ||rhs||_2 is not reached.
    """
    x = np.asarray(guess, dtype=float)
    if np.any(x < 0):
        raise ValueError("guess must have non-negative entries")
    compiled = codegen.compile_network(net)
    f = _rhs_fn(net, light, compiled)

    def objective(z):
        neg = z < 0.0
        if np.any(neg):
            return 1e300 * (1.0 + float(-z[neg].sum()))
        r = f(z)
        return float(r @ r)

    best = x.copy()
    best_obj = objective(x)
    for _ in range(max_restarts):
        simplex = [best]
        for j in range(len(best)):
            e = np.zeros(len(best))
            e[j] = max(0.05 * abs(best[j]), 0.01)
            simplex.append(best + e)
        res = minimize(objective, best, method="Nelder-Mead",
                       options={"initial_simplex": np.asarray(simplex),
                                "maxiter": 4000 * len(best),
                                "xatol": 1e-14, "fatol": 1e-30})
        cand = np.maximum(res.x, 0.0)
        cand_obj = objective(cand)
        if cand_obj < best_obj:
            improved = best_obj - cand_obj > 1e-3 * best_obj
            best, best_obj = cand, cand_obj
            if not improved:
                break
        else:
            break

    if polish:
        best = _newton_polish(f, net, light, best, tol, compiled)

    residual = float(np.linalg.norm(f(best)))
    if residual >= tol:
        raise ConvergenceFailure(residual,
                                 f"tolerance {tol:g} not reached for light={light}")
    eig = jacobian_eigenvalues(net, best, light, compiled)
    return FixedPoint(light=int(light), state=best, residual=residual,
                      eigenvalues=eig, classification=classify(eig))


def _newton_polish(f, net, light, x, tol, compiled, max_iter=60):
    """Damped Newton projected onto the non-negative orthant; never increases
    the residual."""
    x = x.copy()
    r = f(x)
    norm = np.linalg.norm(r)
    for _ in range(max_iter):
        if norm < 0.1 * tol:
            break
        J = finite_difference_jacobian(net, x, light, compiled)
        try:
            dx = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            break
        lam = 1.0
        while lam > 1e-12:
            xn = np.maximum(x + lam * dx, 0.0)
            rn = f(xn)
            nn = np.linalg.norm(rn)
            if nn < norm:
                x, r, norm = xn, rn, nn
                break
            lam *= 0.5
        else:
            break
    return x


def locate_clock_fixed_points(net, ll_probe_hours=400.0, tol=1e-10):
    """Both constant-condition fixed points of a clock network.

    DD starts from a small positive guess; LL starts from the endpoint of an
    LL trajectory, which lands in the basin of the entrained steady state.
    """
    from . import light as lt
    from .ode import OdeConfig, integrate

    dd = find_fixed_point(net, 0, 1e-3 * np.ones(len(net.species)), tol=tol)
    tr = integrate(net, lt.ConstantLight(), ll_probe_hours,
                   OdeConfig(output_grid=ll_probe_hours))
    ll = find_fixed_point(net, 1, np.maximum(tr.states[-1], 0.0), tol=tol)
    return {0: dd, 1: ll}


def report_text(net, fps):
    """Plain-text report: one block per light condition."""
    lines = []
    for light in sorted(fps):
        fp = fps[light]
        lines.append(f"light={light} ({'LL' if light else 'DD'})")
        lines.append(f"  classification: {fp.classification.value}")
        lines.append(f"  residual: {fp.residual:.3e}")
        for name, val in zip(net.species_names, fp.state):
            lines.append(f"  {name} = {val:.10g}")
        for obs in net.observables:
            lines.append(f"  {obs} = {fp.observable(net, obs):.10g}")
        lines.append("  eigenvalues (re, im):")
        for ev in fp.eigenvalues:
            lines.append(f"    {ev.real: .6f}  {ev.imag:+.6f}i")
        lines.append("")
    return "\n".join(lines)
