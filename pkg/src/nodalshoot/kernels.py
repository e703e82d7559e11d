"""Compiled inner loops: radial right-hand side and an adaptive Dormand-Prince
5(4) integrator with dense output, evaluation-grid sampling and sign-change
events.

The functions here only take arrays and scalars so that they compile under
numba's nopython mode; ``nodalshoot.ode`` wraps them.
"""
import math

import numpy as np

from ._jit import jit

# Dormand-Prince 5(4) tableau with Hairer's 4th-order continuous extension.
DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
DP_A = np.array([
    [0.0, 0.0, 0.0, 0.0, 0.0],
    [1 / 5, 0.0, 0.0, 0.0, 0.0],
    [3 / 40, 9 / 40, 0.0, 0.0, 0.0],
    [44 / 45, -56 / 15, 32 / 9, 0.0, 0.0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0.0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
])
DP_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
DP_E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
DP_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

# termination codes
RUNNING = 0
REACHED_END = 1
BLOWUP = 2
NONFINITE = 3
STEP_UNDERFLOW = 4
NODE_LIMIT = 5

EVENT_CROSSING = 0
EVENT_GRAZE = 1


@jit
def radial_rhs(r, y, out, lam, mu, beta, dim_coef, n, ndir):
    """Fill ``out`` with d/dr of the packed state.

    Layout: ``y[:n]`` values, ``y[n:2n]`` radial derivatives, then ``ndir``
    blocks of ``2n`` holding (phi, phi') of the variational equations.
    ``lam`` is already zero for geometries without the linear term.
    """
    for j in range(n):
        uj = y[j]
        duj = y[n + j]
        out[j] = duj
        s = lam[j] - mu[j] * uj * uj
        for i in range(n):
            if i != j:
                s -= beta[i, j] * y[i] * y[i]
        acc = s * uj
        if dim_coef != 0.0:
            acc -= dim_coef * duj / r
        out[n + j] = acc
    for k in range(ndir):
        off = 2 * n + 2 * n * k
        for j in range(n):
            uj = y[j]
            pj = y[off + j]
            dpj = y[off + n + j]
            out[off + j] = dpj
            s = lam[j] - 3.0 * mu[j] * uj * uj
            cross = 0.0
            for i in range(n):
                if i != j:
                    s -= beta[i, j] * y[i] * y[i]
                    cross += beta[i, j] * y[i] * y[off + i]
            acc = s * pj - 2.0 * uj * cross
            if dim_coef != 0.0:
                acc -= dim_coef * dpj / r
            out[off + n + j] = acc


@jit
def _rms_primary(v, scale, m):
    acc = 0.0
    for i in range(m):
        q = v[i] / scale[i]
        acc += q * q
    return math.sqrt(acc / m)


@jit
def _initial_step(r0, y0, f0, lam, mu, beta, dim_coef, n, ndir, rtol, atol, r_end):
    m = 2 * n
    scale = np.empty(m)
    for i in range(m):
        scale[i] = atol + rtol * abs(y0[i])
    d0 = _rms_primary(y0, scale, m)
    d1 = _rms_primary(f0, scale, m)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    h0 = min(h0, r_end - r0)
    y1 = y0 + h0 * f0
    f1 = np.empty_like(y0)
    radial_rhs(r0 + h0, y1, f1, lam, mu, beta, dim_coef, n, ndir)
    diff = np.empty(m)
    for i in range(m):
        diff[i] = (f1[i] - f0[i]) / h0
    d2 = _rms_primary(diff, scale, m)
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100.0 * h0, h1, r_end - r0)


@jit
def _interp_component(y0j, q, theta):
    # q holds h * (K^T P)[j, :]; Horner in theta
    return y0j + theta * (q[0] + theta * (q[1] + theta * (q[2] + theta * q[3])))


@jit
def dopri5_integrate(y0, r0, r_end, lam, mu, beta, dim_coef, n, ndir,
                     rtol, atol, max_step, h_init, blowup, zero_tol,
                     r_eval, stop_counts, max_events, land_on_eval):
    """Adaptive integration of the packed radial system from ``r0`` to ``r_end``.

    Step-size control uses only the 2n primary slots, so attaching variational
    blocks never changes the accepted step sequence.

    Returns ``(status, r, y, samples, n_filled, ev_comp, ev_r, ev_kind,
    counts, n_accepted, n_rejected)``.  ``samples`` holds the interpolated
    state at ``r_eval`` (NaN past termination).  With ``land_on_eval`` steps
    are clipped to end on every ``r_eval`` point, so samples are step
    endpoints rather than interpolated values.
    """
    nstate = y0.size
    m = 2 * n
    y = y0.copy()
    r = r0
    K = np.empty((7, nstate))
    ytmp = np.empty(nstate)
    ynew = np.empty(nstate)
    comp = np.zeros(nstate)  # Kahan compensation of the state update
    comp_new = np.empty(nstate)
    Q = np.empty((nstate, 4))
    samples = np.full((r_eval.size, nstate), np.nan)
    ev_comp = np.empty(max_events, np.int64)
    ev_r = np.empty(max_events)
    ev_kind = np.empty(max_events, np.int64)
    nev = 0
    counts = np.zeros(n, np.int64)
    last_sign = np.zeros(n)
    pending = np.full(n, np.nan)
    thetas = np.array([0.25, 0.5, 0.75, 1.0])

    for j in range(n):
        if abs(y[j]) > zero_tol:
            last_sign[j] = 1.0 if y[j] > 0 else -1.0

    ie = 0
    while ie < r_eval.size and r_eval[ie] <= r0:
        if r_eval[ie] == r0:
            samples[ie, :] = y
        ie += 1

    radial_rhs(r, y, K[0], lam, mu, beta, dim_coef, n, ndir)
    if h_init > 0.0:
        h = h_init
    else:
        h = _initial_step(r, y, K[0], lam, mu, beta, dim_coef, n, ndir, rtol, atol, r_end)

    status = RUNNING
    n_acc = 0
    n_rej = 0
    prev_rejected = False
    while status == RUNNING:
        if r >= r_end:
            status = REACHED_END
            break
        h = min(h, max_step)
        h_free = h
        r_target = r + h
        if r_target >= r_end:
            h = r_end - r
            r_target = r_end
        if land_on_eval and ie < r_eval.size and r_target >= r_eval[ie]:
            r_target = min(r_eval[ie], r_end)
            h = r_target - r
        if h <= 1e-14 * max(1.0, abs(r)):
            status = STEP_UNDERFLOW
            break

        for s in range(1, 6):
            for i in range(nstate):
                acc = 0.0
                for q in range(s):
                    acc += DP_A[s, q] * K[q, i]
                ytmp[i] = y[i] + h * acc
            radial_rhs(r + DP_C[s] * h, ytmp, K[s], lam, mu, beta, dim_coef, n, ndir)
        for i in range(nstate):
            acc = 0.0
            for q in range(6):
                acc += DP_B[q] * K[q, i]
            incr = h * acc + comp[i]
            ynew[i] = y[i] + incr
            comp_new[i] = incr - (ynew[i] - y[i])
        r_new = r_target
        radial_rhs(r_new, ynew, K[6], lam, mu, beta, dim_coef, n, ndir)

        err = 0.0
        for i in range(m):
            e = 0.0
            for q in range(7):
                e += DP_E[q] * K[q, i]
            sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
            err += (h * e / sc) ** 2
        err = math.sqrt(err / m)

        if not (err <= 1.0):
            n_rej += 1
            prev_rejected = True
            if err != err or err == math.inf:
                h *= 0.2
            else:
                h *= max(0.2, 0.9 * err ** -0.2)
            continue

        n_acc += 1
        for i in range(nstate):
            for c in range(4):
                acc = 0.0
                for q in range(7):
                    acc += K[q, i] * DP_P[q, c]
                Q[i, c] = h * acc

        while ie < r_eval.size and r_eval[ie] <= r_new:
            if r_eval[ie] == r_new:
                samples[ie, :] = ynew
            else:
                th = (r_eval[ie] - r) / h
                for i in range(nstate):
                    samples[ie, i] = _interp_component(y[i], Q[i], th)
            ie += 1

        for j in range(n):
            th_lo = 0.0
            for t_idx in range(4):
                th = thetas[t_idx]
                val = ynew[j] if th == 1.0 else _interp_component(y[j], Q[j], th)
                if abs(val) > zero_tol:
                    sg = 1.0 if val > 0 else -1.0
                    if last_sign[j] != 0.0 and sg != last_sign[j]:
                        lo = th_lo
                        hi = th
                        for _ in range(60):
                            mid = 0.5 * (lo + hi)
                            if _interp_component(y[j], Q[j], mid) * sg > 0.0:
                                hi = mid
                            else:
                                lo = mid
                        counts[j] += 1
                        if nev < max_events:
                            ev_comp[nev] = j
                            ev_r[nev] = r + 0.5 * (lo + hi) * h
                            ev_kind[nev] = EVENT_CROSSING
                            nev += 1
                    elif pending[j] == pending[j] and nev < max_events:
                        ev_comp[nev] = j
                        ev_r[nev] = pending[j]
                        ev_kind[nev] = EVENT_GRAZE
                        nev += 1
                    last_sign[j] = sg
                    pending[j] = np.nan
                    th_lo = th
                elif last_sign[j] != 0.0 and pending[j] != pending[j]:
                    pending[j] = r + th * h

        for i in range(nstate):
            y[i] = ynew[i]
            comp[i] = comp_new[i]
            K[0, i] = K[6, i]
        r = r_new

        for i in range(nstate):
            if not math.isfinite(y[i]):
                status = NONFINITE
        if status != RUNNING:
            break
        for j in range(n):
            if abs(y[j]) > blowup:
                status = BLOWUP
        if status != RUNNING:
            break
        for j in range(n):
            if stop_counts[j] >= 0 and counts[j] > stop_counts[j]:
                status = NODE_LIMIT
        if status != RUNNING:
            break

        if err == 0.0:
            factor = 10.0
        else:
            factor = min(10.0, 0.9 * err ** -0.2)
        if prev_rejected:
            factor = min(1.0, factor)
        prev_rejected = False
        h = max(h, h_free) * factor if land_on_eval else h * factor

    return (status, r, y, samples, ie, ev_comp[:nev].copy(), ev_r[:nev].copy(),
            ev_kind[:nev].copy(), counts, n_acc, n_rej)
