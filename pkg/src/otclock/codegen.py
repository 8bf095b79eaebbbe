"""Per-network compilation of rate laws and simulation kernels.

A network's rate-law trees are rendered once into flat Python source
(``rates``/``rhs`` plus the SSA and ODE kernels that call them).  Parameter
values and omega stay in a runtime vector, so networks that differ only in
parameter values — rescaled or mutated variants — share one generated module
and one JIT compilation.

The generated module is executed as plain Python and, when numba is
available, each function is additionally wrapped with ``numba.njit(nogil=True)``.
Both paths run the identical source; the plain-Python form is the fallback
when JIT is disabled (``OTCLOCK_NO_JIT=1``) or numba is missing.

Kernel status codes: 0 done, 1 uniform buffer exhausted, 2 event-log buffer
full, 3 rate evaluation failed, 5 step-size underflow / step budget, 6
negative undershoot beyond tolerance.  Callers refill buffers and resume, or
map codes to exceptions.
"""

from __future__ import annotations

import os

import numpy as np

from . import expr as ex

try:
    import numba
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

STATUS_DONE = 0
STATUS_NEED_UNIFORMS = 1
STATUS_NEED_EVENT_BUFFER = 2
STATUS_RATE_ERROR = 3
STATUS_STEP_FAILURE = 5
STATUS_NEGATIVE_STATE = 6

# run_direct / run_nrm integer state slots
IO_CURSOR, IO_GRID, IO_SEG, IO_NEV, IO_TICKS, IO_EVN, IO_ABSORBED, IO_ERR_RID, IO_INIT = range(9)
IOI_LEN = 9

# opts_i slots
OPT_RECORD_EVENTS, OPT_SCLOCK, OPT_DAWN_TICK, OPT_DUSK_TICK, OPT_DAY_TICKS = range(5)
OPTS_I_LEN = 5


def jit_default():
    if os.environ.get("OTCLOCK_NO_JIT"):
        return False
    return HAVE_NUMBA


_TEMPLATE = '''
import numpy as np

_NS = {n_species}
_NR = {n_reactions}


def _H(x):
    return 1.0 if x > 0.0 else 0.0


def rates(state, light, p, out):
    # species reads are clamped at 0 so ODE stage vectors with tiny negative
    # entries stay inside the rate laws' domain; SSA states are never negative
{clamp_body}
{rates_body}


def rhs(state, light, p, rbuf, out):
    rates(state, light, p, rbuf)
{rhs_body}


def _sift_up(heap, hpos, keys, i):
    rid = heap[i]
    k = keys[rid]
    while i > 0:
        par = (i - 1) >> 1
        prid = heap[par]
        if keys[prid] <= k:
            break
        heap[i] = prid
        hpos[prid] = i
        i = par
    heap[i] = rid
    hpos[rid] = i


def _sift_down(heap, hpos, keys, i, n):
    rid = heap[i]
    k = keys[rid]
    while True:
        c = 2 * i + 1
        if c >= n:
            break
        if c + 1 < n and keys[heap[c + 1]] < keys[heap[c]]:
            c += 1
        crid = heap[c]
        if keys[crid] >= k:
            break
        heap[i] = crid
        hpos[crid] = i
        i = c
    heap[i] = rid
    hpos[rid] = i


def _heap_update(heap, hpos, keys, rid, n):
    i = hpos[rid]
    _sift_up(heap, hpos, keys, i)
    if hpos[rid] == i:
        _sift_down(heap, hpos, keys, i, n)


def run_direct(state, p, stoich, seg_bounds, seg_light, grid, rec,
               u, iof, ioi, ev_t, ev_r, opts_i, opts_f):
    T = grid.shape[0]
    nseg = seg_light.shape[0]
    t_end = seg_bounds[nseg]
    record_events = opts_i[0] != 0
    sclock = opts_i[1] != 0
    dawn_tick = opts_i[2]
    dusk_tick = opts_i[3]
    day_ticks = opts_i[4]
    tick_rate = opts_f[0]

    t = iof[0]
    cur = ioi[0]
    gi = ioi[1]
    seg = ioi[2]
    nev = ioi[3]
    ticks = ioi[4]
    evn = ioi[5]

    a = np.empty(_NR)
    ucap = u.shape[0]
    evcap = ev_t.shape[0]
    status = 0

    while True:
        while seg < nseg - 1 and t >= seg_bounds[seg + 1]:
            seg += 1
        if sclock:
            kd = ticks % day_ticks
            light = 1.0 if (kd >= dawn_tick and kd < dusk_tick) else 0.0
        else:
            light = seg_light[seg]

        rates(state, light, p, a)
        a0 = 0.0
        bad = -1
        for r in range(_NR):
            ar = a[r]
            if not (ar >= 0.0) or ar == np.inf:
                bad = r
                break
            a0 += ar
        if bad >= 0:
            ioi[7] = bad
            status = 3
            break
        if sclock:
            a0 += tick_rate

        if a0 <= 0.0:
            if seg < nseg - 1:
                tn = seg_bounds[seg + 1]
                while gi < T and grid[gi] < tn:
                    for j in range(_NS):
                        rec[gi, j] = np.int64(state[j])
                    gi += 1
                t = tn
                continue
            while gi < T:
                for j in range(_NS):
                    rec[gi, j] = np.int64(state[j])
                gi += 1
            ioi[6] = 1
            t = t_end
            status = 0
            break

        if cur + 2 > ucap:
            status = 1
            break
        if record_events and evn + 1 > evcap:
            status = 2
            break

        tau = -np.log(1.0 - u[cur]) / a0
        cur += 1
        tn = t + tau

        if seg < nseg - 1 and tn >= seg_bounds[seg + 1]:
            # waiting time crosses the next light switch: discard the sample
            # and advance to the switch (exact for exponential waiting times)
            tsw = seg_bounds[seg + 1]
            while gi < T and grid[gi] < tsw:
                for j in range(_NS):
                    rec[gi, j] = np.int64(state[j])
                gi += 1
            t = tsw
            continue
        if tn >= t_end:
            while gi < T:
                for j in range(_NS):
                    rec[gi, j] = np.int64(state[j])
                gi += 1
            t = t_end
            status = 0
            break

        while gi < T and grid[gi] < tn:
            for j in range(_NS):
                rec[gi, j] = np.int64(state[j])
            gi += 1

        thr = u[cur] * a0
        cur += 1
        rid = -1
        acc = 0.0
        for r in range(_NR):
            acc += a[r]
            if thr < acc:
                rid = r
                break
        t = tn
        if rid < 0:
            if sclock:
                ticks += 1
                if record_events:
                    kd = ticks % day_ticks
                    if kd == dawn_tick or kd == dusk_tick % day_ticks:
                        ev_t[evn] = t
                        ev_r[evn] = -1
                        evn += 1
                continue
            for r in range(_NR - 1, -1, -1):
                if a[r] > 0.0:
                    rid = r
                    break
            if rid < 0:
                continue
        for j in range(_NS):
            state[j] += stoich[rid, j]
        nev += 1
        if record_events:
            ev_t[evn] = t
            ev_r[evn] = rid
            evn += 1

    iof[0] = t
    ioi[0] = cur
    ioi[1] = gi
    ioi[2] = seg
    ioi[3] = nev
    ioi[4] = ticks
    ioi[5] = evn
    return status


def run_nrm(state, p, stoich, dep_ptr, dep_idx, lmask,
            seg_bounds, seg_light, grid, rec,
            u, iof, ioi, ev_t, ev_r, opts_i, taus, acur, heap, hpos):
    T = grid.shape[0]
    nseg = seg_light.shape[0]
    t_end = seg_bounds[nseg]
    record_events = opts_i[0] != 0

    t = iof[0]
    cur = ioi[0]
    gi = ioi[1]
    seg = ioi[2]
    nev = ioi[3]
    evn = ioi[5]

    anew = np.empty(_NR)
    ucap = u.shape[0]
    evcap = ev_t.shape[0]
    status = 0
    light = seg_light[seg]

    if ioi[8] == 0:
        if cur + _NR > ucap:
            iof[0] = t
            ioi[0] = cur
            return 1
        rates(state, light, p, acur)
        bad = -1
        for r in range(_NR):
            ar = acur[r]
            if not (ar >= 0.0) or ar == np.inf:
                bad = r
                break
        if bad >= 0:
            ioi[7] = bad
            iof[0] = t
            return 3
        for r in range(_NR):
            if acur[r] > 0.0:
                taus[r] = t - np.log(1.0 - u[cur]) / acur[r]
                cur += 1
            else:
                taus[r] = np.inf
            heap[r] = r
            hpos[r] = r
        for i in range(_NR // 2 - 1, -1, -1):
            _sift_down(heap, hpos, taus, i, _NR)
        ioi[8] = 1

    while True:
        if seg < nseg - 1:
            seg_end = seg_bounds[seg + 1]
        else:
            seg_end = t_end
        top = heap[0]
        tmin = taus[top]

        if tmin >= seg_end:
            if seg >= nseg - 1:
                while gi < T:
                    for j in range(_NS):
                        rec[gi, j] = np.int64(state[j])
                    gi += 1
                if tmin == np.inf:
                    ioi[6] = 1
                t = t_end
                status = 0
                break
            if cur + _NR > ucap:
                status = 1
                break
            while gi < T and grid[gi] < seg_end:
                for j in range(_NS):
                    rec[gi, j] = np.int64(state[j])
                gi += 1
            t = seg_end
            seg += 1
            light = seg_light[seg]
            # light-dependent channels change rate discontinuously: invalidate
            # and resample their pending firing times
            rates(state, light, p, anew)
            bad = -1
            for r in range(_NR):
                if lmask[r]:
                    ar = anew[r]
                    if not (ar >= 0.0) or ar == np.inf:
                        bad = r
                        break
                    acur[r] = ar
                    if ar > 0.0:
                        taus[r] = t - np.log(1.0 - u[cur]) / ar
                        cur += 1
                    else:
                        taus[r] = np.inf
                    _heap_update(heap, hpos, taus, r, _NR)
            if bad >= 0:
                ioi[7] = bad
                status = 3
                break
            continue

        if cur + _NR + 1 > ucap:
            status = 1
            break
        if record_events and evn + 1 > evcap:
            status = 2
            break

        rid = top
        while gi < T and grid[gi] < tmin:
            for j in range(_NS):
                rec[gi, j] = np.int64(state[j])
            gi += 1
        t = tmin
        for j in range(_NS):
            state[j] += stoich[rid, j]
        nev += 1
        if record_events:
            ev_t[evn] = t
            ev_r[evn] = rid
            evn += 1

        rates(state, light, p, anew)
        bad = -1
        for k in range(dep_ptr[rid], dep_ptr[rid + 1]):
            o = dep_idx[k]
            ao = anew[o]
            if not (ao >= 0.0) or ao == np.inf:
                bad = o
                break
            aold = acur[o]
            if o == rid or taus[o] == np.inf or aold <= 0.0:
                if ao > 0.0:
                    taus[o] = t - np.log(1.0 - u[cur]) / ao
                    cur += 1
                else:
                    taus[o] = np.inf
            else:
                if ao > 0.0:
                    taus[o] = t + (aold / ao) * (taus[o] - t)
                else:
                    taus[o] = np.inf
            acur[o] = ao
            _heap_update(heap, hpos, taus, o, _NR)
        if bad >= 0:
            ioi[7] = bad
            status = 3
            break

    iof[0] = t
    ioi[0] = cur
    ioi[1] = gi
    ioi[2] = seg
    ioi[3] = nev
    ioi[5] = evn
    return status


# Dormand-Prince 5(4): Butcher tableau, embedded error weights and the
# 4th-order dense-output coefficients.
_A21 = 1.0 / 5.0
_A31 = 3.0 / 40.0
_A32 = 9.0 / 40.0
_A41 = 44.0 / 45.0
_A42 = -56.0 / 15.0
_A43 = 32.0 / 9.0
_A51 = 19372.0 / 6561.0
_A52 = -25360.0 / 2187.0
_A53 = 64448.0 / 6561.0
_A54 = -212.0 / 729.0
_A61 = 9017.0 / 3168.0
_A62 = -355.0 / 33.0
_A63 = 46732.0 / 5247.0
_A64 = 49.0 / 176.0
_A65 = -5103.0 / 18656.0
_A71 = 35.0 / 384.0
_A73 = 500.0 / 1113.0
_A74 = 125.0 / 192.0
_A75 = -2187.0 / 6784.0
_A76 = 11.0 / 84.0
_E1 = 71.0 / 57600.0
_E3 = -71.0 / 16695.0
_E4 = 71.0 / 1920.0
_E5 = -17253.0 / 339200.0
_E6 = 22.0 / 525.0
_E7 = -1.0 / 40.0
_D1 = -12715105075.0 / 11282082432.0
_D3 = 87487479700.0 / 32700410799.0
_D4 = -10690763975.0 / 1880347072.0
_D5 = 701980252875.0 / 199316789632.0
_D6 = -1453857185.0 / 822651844.0
_D7 = 69997945.0 / 29380423.0


def integrate_dp54(y, p, seg_bounds, seg_light, grid, out,
                   rtol, atol, h_init, h_max, iof, ioi):
    T = grid.shape[0]
    nseg = seg_light.shape[0]
    t_end = seg_bounds[nseg]
    gi = 0
    while gi < T and grid[gi] <= seg_bounds[0]:
        for j in range(_NS):
            out[gi, j] = y[j]
        gi += 1

    rbuf = np.empty(_NR)
    k1 = np.empty(_NS)
    k2 = np.empty(_NS)
    k3 = np.empty(_NS)
    k4 = np.empty(_NS)
    k5 = np.empty(_NS)
    k6 = np.empty(_NS)
    k7 = np.empty(_NS)
    ytmp = np.empty(_NS)
    ynew = np.empty(_NS)
    rc2 = np.empty(_NS)
    rc3 = np.empty(_NS)
    rc4 = np.empty(_NS)
    rc5 = np.empty(_NS)

    facold = 1e-4
    nsteps = 0
    h = h_init

    for seg in range(nseg):
        t = seg_bounds[seg]
        te = seg_bounds[seg + 1]
        if te <= t:
            continue
        light = seg_light[seg]
        # right-hand side is discontinuous across segment boundaries: restart
        # the FSAL chain and re-select the step size
        rhs(y, light, p, rbuf, k1)
        ok = True
        for j in range(_NS):
            if not np.isfinite(k1[j]):
                ok = False
        if not ok:
            iof[0] = t
            ioi[1] = nsteps
            return 3

        if h_init > 0.0:
            h = h_init
        else:
            d0 = 0.0
            d1 = 0.0
            for j in range(_NS):
                sc = atol + rtol * abs(y[j])
                q0 = y[j] / sc
                q1 = k1[j] / sc
                d0 += q0 * q0
                d1 += q1 * q1
            d0 = np.sqrt(d0 / _NS)
            d1 = np.sqrt(d1 / _NS)
            if d0 < 1e-5 or d1 < 1e-5:
                h0 = 1e-6
            else:
                h0 = 0.01 * d0 / d1
            if h0 > te - t:
                h0 = te - t
            for j in range(_NS):
                ytmp[j] = y[j] + h0 * k1[j]
            rhs(ytmp, light, p, rbuf, k2)
            d2 = 0.0
            for j in range(_NS):
                sc = atol + rtol * abs(y[j])
                q = (k2[j] - k1[j]) / sc
                d2 += q * q
            d2 = np.sqrt(d2 / _NS) / h0
            dm = d1 if d1 > d2 else d2
            if dm <= 1e-15:
                h1 = 1e-6 if 1e-6 > h0 * 1e-3 else h0 * 1e-3
            else:
                h1 = (0.01 / dm) ** 0.2
            h = 100.0 * h0
            if h1 < h:
                h = h1
        if h > h_max:
            h = h_max
        if h > te - t:
            h = te - t

        while t < te:
            nsteps += 1
            if nsteps > 20000000:
                iof[0] = t
                ioi[1] = nsteps
                return 5
            tfloor = 1.0 if t < 1.0 else t
            if h < 1e-12 * tfloor:
                iof[0] = t
                ioi[1] = nsteps
                return 5
            last = False
            if t + h >= te:
                h = te - t
                last = True
            tnew = te if last else t + h

            for j in range(_NS):
                ytmp[j] = y[j] + h * (_A21 * k1[j])
            rhs(ytmp, light, p, rbuf, k2)
            for j in range(_NS):
                ytmp[j] = y[j] + h * (_A31 * k1[j] + _A32 * k2[j])
            rhs(ytmp, light, p, rbuf, k3)
            for j in range(_NS):
                ytmp[j] = y[j] + h * (_A41 * k1[j] + _A42 * k2[j] + _A43 * k3[j])
            rhs(ytmp, light, p, rbuf, k4)
            for j in range(_NS):
                ytmp[j] = y[j] + h * (_A51 * k1[j] + _A52 * k2[j] + _A53 * k3[j]
                                      + _A54 * k4[j])
            rhs(ytmp, light, p, rbuf, k5)
            for j in range(_NS):
                ytmp[j] = y[j] + h * (_A61 * k1[j] + _A62 * k2[j] + _A63 * k3[j]
                                      + _A64 * k4[j] + _A65 * k5[j])
            rhs(ytmp, light, p, rbuf, k6)
            for j in range(_NS):
                ynew[j] = y[j] + h * (_A71 * k1[j] + _A73 * k3[j] + _A74 * k4[j]
                                      + _A75 * k5[j] + _A76 * k6[j])
            rhs(ynew, light, p, rbuf, k7)

            err = 0.0
            for j in range(_NS):
                e = h * (_E1 * k1[j] + _E3 * k3[j] + _E4 * k4[j]
                         + _E5 * k5[j] + _E6 * k6[j] + _E7 * k7[j])
                ay = abs(y[j])
                an = abs(ynew[j])
                sc = atol + rtol * (ay if ay > an else an)
                q = e / sc
                err += q * q
            err = np.sqrt(err / _NS)

            if not np.isfinite(err):
                h *= 0.2
                continue
            if err <= 1.0:
                if gi < T and grid[gi] <= tnew:
                    for j in range(_NS):
                        dy = ynew[j] - y[j]
                        bspl = h * k1[j] - dy
                        rc2[j] = dy
                        rc3[j] = bspl
                        rc4[j] = dy - h * k7[j] - bspl
                        rc5[j] = h * (_D1 * k1[j] + _D3 * k3[j] + _D4 * k4[j]
                                      + _D5 * k5[j] + _D6 * k6[j] + _D7 * k7[j])
                    while gi < T and grid[gi] <= tnew:
                        th = (grid[gi] - t) / h
                        th1 = 1.0 - th
                        for j in range(_NS):
                            out[gi, j] = y[j] + th * (rc2[j] + th1 * (rc3[j]
                                         + th * (rc4[j] + th1 * rc5[j])))
                        gi += 1
                for j in range(_NS):
                    if ynew[j] < -1e-9:
                        iof[0] = tnew
                        ioi[1] = nsteps
                        return 6
                t = tnew
                for j in range(_NS):
                    y[j] = ynew[j]
                    k1[j] = k7[j]
                # PI step controller
                if err <= 0.0:
                    factor = 10.0
                else:
                    factor = 0.9 * err ** -0.14 * facold ** 0.08
                    if factor > 10.0:
                        factor = 10.0
                    elif factor < 0.2:
                        factor = 0.2
                facold = err if err > 1e-10 else 1e-10
                h = h * factor
                if h > h_max:
                    h = h_max
            else:
                shrink = 0.9 * err ** -0.2
                if shrink < 0.2:
                    shrink = 0.2
                h = h * shrink

    iof[0] = t_end
    ioi[1] = nsteps
    return 0
'''


def render_source(net):
    """Generated module source for a network; identical for all networks that
    share structure (species order, reactions, parameter order)."""
    sidx = net.species_index
    pidx = {name: i for i, name in enumerate(net.param_order)}
    oslot = net.omega_slot

    read = set()
    for r in net.reactions:
        for name in ex.species_names(r.rate):
            read.add(sidx[name])
    clamp_lines = []
    for j in sorted(read):
        clamp_lines.append(f"    s{j} = state[{j}] if state[{j}] > 0.0 else 0.0")
    if not clamp_lines:
        clamp_lines.append("    pass")

    rate_lines = []
    for i, r in enumerate(net.reactions):
        src = ex.to_python_source(r.rate, sidx, pidx, oslot)
        rate_lines.append(f"    out[{i}] = {src}")

    rhs_lines = []
    for j in range(len(net.species)):
        terms = []
        for i in range(len(net.reactions)):
            c = int(net.stoich[i, j])
            if c == 0:
                continue
            if c == 1:
                terms.append(f"+ rbuf[{i}]")
            elif c == -1:
                terms.append(f"- rbuf[{i}]")
            else:
                sign = "+" if c > 0 else "-"
                terms.append(f"{sign} {abs(c)}.0 * rbuf[{i}]")
        if terms:
            joined = " ".join(terms)
            if joined.startswith("+ "):
                joined = joined[2:]
            rhs_lines.append(f"    out[{j}] = {joined}")
        else:
            rhs_lines.append(f"    out[{j}] = 0.0")

    return _TEMPLATE.format(
        n_species=len(net.species),
        n_reactions=len(net.reactions),
        clamp_body="\n".join(clamp_lines),
        rates_body="\n".join(rate_lines),
        rhs_body="\n".join(rhs_lines),
    )


def _dependency_graph(net):
    """CSR (ptr, idx): reactions whose propensity must be refreshed after each
    firing.  reads(o) = species in o's rate law plus o's reactants; an edge
    r -> o exists when r changes a species o reads; r always depends on itself."""
    R = len(net.reactions)
    reads = []
    for r in net.reactions:
        names = set(ex.species_names(r.rate))
        names.update(n for n, _ in r.reactants)
        reads.append({net.species_index[n] for n in names})
    affects = [set(np.nonzero(net.stoich[i])[0].tolist()) for i in range(R)]
    ptr = np.zeros(R + 1, dtype=np.int64)
    idx = []
    for i in range(R):
        deps = [o for o in range(R) if o == i or (affects[i] & reads[o])]
        idx.extend(deps)
        ptr[i + 1] = len(idx)
    return ptr, np.asarray(idx, dtype=np.int64)


class CompiledNetwork:
    """Executable kernels plus the constant arrays they consume."""

    def __init__(self, net, namespace, jitted):
        self.jitted = jitted
        self.rates = namespace["rates"]
        self._rhs = namespace["rhs"]
        self.run_direct = namespace["run_direct"]
        self.run_nrm = namespace["run_nrm"]
        self.integrate_dp54 = namespace["integrate_dp54"]
        self.stoich = np.ascontiguousarray(net.stoich)
        self.dep_ptr, self.dep_idx = _dependency_graph(net)
        self.light_mask = np.ascontiguousarray(net.light_dependent)
        self.n_species = len(net.species)
        self.n_reactions = len(net.reactions)

    def rates_vector(self, state, light, param_vector):
        out = np.empty(self.n_reactions)
        self.rates(np.asarray(state, dtype=np.float64), float(light),
                   param_vector, out)
        return out

    def rhs_vector(self, state, light, param_vector):
        rbuf = np.empty(self.n_reactions)
        out = np.empty(self.n_species)
        self._rhs(np.asarray(state, dtype=np.float64), float(light),
                  param_vector, rbuf, out)
        return out


_CACHE = {}


def compile_network(net, jit=None):
    """Compile (or fetch from cache) the kernels for a network's structure."""
    if jit is None:
        jit = jit_default()
    jit = bool(jit and HAVE_NUMBA)
    src = render_source(net)
    key = (src, jit)
    cached = _CACHE.get(key)
    if cached is not None:
        return CompiledNetwork(net, cached, jit)

    namespace = {}
    exec(compile(src, f"<otclock-kernels-{abs(hash(src)) & 0xFFFFFF:06x}>", "exec"),
         namespace)
    if jit:
        opts = dict(nogil=True, cache=False, fastmath=False)
        for name in ("_H", "rates"):
            namespace[name] = numba.njit(**opts)(namespace[name])
        namespace["rhs"] = numba.njit(**opts)(namespace["rhs"])
        for name in ("_sift_up", "_sift_down"):
            namespace[name] = numba.njit(**opts)(namespace[name])
        namespace["_heap_update"] = numba.njit(**opts)(namespace["_heap_update"])
        for name in ("run_direct", "run_nrm", "integrate_dp54"):
            namespace[name] = numba.njit(**opts)(namespace[name])
    _CACHE[key] = namespace
    return CompiledNetwork(net, namespace, jit)
