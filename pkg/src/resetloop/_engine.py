"""Fixed-step hybrid stepping kernels (numba-compiled).

The closed loop advances controller and plant as exact ZOH discretizations;
on a sign change (or exact zero after a nonzero sample) of the error the
controller state jumps through A_R *before* the flow update of that step.
Resets are sample-synchronous: no sub-sample zero-crossing interpolation.

Both kernels are strictly sequential recurrences; independent runs are safe
to execute concurrently (nogil).
"""

import numpy as np
from numba import njit

DIVERGENCE_LIMIT = 1e12


@njit(cache=True, nogil=True)
def closed_loop_kernel(
    Adc, Bdc, Cc, Dc, ARc,
    Adp, Bdp, Cp,
    r, d,
    xc0, xp0,
    reset_enabled,
    ev_idx, ev_pre, ev_post,
):
    n = r.shape[0]
    nxc = xc0.shape[0]
    nxp = xp0.shape[0]
    cap = ev_idx.shape[0]
    y = np.empty(n)
    e = np.empty(n)
    u = np.empty(n)
    xc = xc0.copy()
    xp = xp0.copy()
    xc_new = np.empty(nxc)
    xp_new = np.empty(nxp)
    n_ev = 0
    e_prev = 0.0
    for k in range(n):
        yk = 0.0
        for i in range(nxp):
            yk += Cp[i] * xp[i]
        y[k] = yk
        ek = r[k] - yk
        e[k] = ek
        if reset_enabled and k > 0:
            if e_prev * ek < 0.0 or (ek == 0.0 and e_prev != 0.0):
                if n_ev < cap:
                    ev_idx[n_ev] = k
                    for i in range(nxc):
                        ev_pre[n_ev, i] = xc[i]
                for i in range(nxc):
                    acc = 0.0
                    for j in range(nxc):
                        acc += ARc[i, j] * xc[j]
                    xc_new[i] = acc
                for i in range(nxc):
                    xc[i] = xc_new[i]
                if n_ev < cap:
                    for i in range(nxc):
                        ev_post[n_ev, i] = xc[i]
                n_ev += 1
        uk = Dc * ek
        for i in range(nxc):
            uk += Cc[i] * xc[i]
        u[k] = uk
        pu = uk + d[k]
        for i in range(nxp):
            acc = Bdp[i] * pu
            for j in range(nxp):
                acc += Adp[i, j] * xp[j]
            xp_new[i] = acc
        for i in range(nxc):
            acc = Bdc[i] * ek
            for j in range(nxc):
                acc += Adc[i, j] * xc[j]
            xc_new[i] = acc
        for i in range(nxp):
            xp[i] = xp_new[i]
        for i in range(nxc):
            xc[i] = xc_new[i]
        e_prev = ek
        if abs(yk) > DIVERGENCE_LIMIT:
            return y, e, u, n_ev, k
    return y, e, u, n_ev, -1


@njit(cache=True, nogil=True)
def open_loop_kernel(
    Ad, Bd, C, D, AR,
    e,
    x0,
    reset_enabled,
    ev_idx, ev_pre, ev_post,
):
    n = e.shape[0]
    nx = x0.shape[0]
    cap = ev_idx.shape[0]
    y = np.empty(n)
    x = x0.copy()
    x_new = np.empty(nx)
    n_ev = 0
    for k in range(n):
        ek = e[k]
        if reset_enabled and k > 0:
            ep = e[k - 1]
            if ep * ek < 0.0 or (ek == 0.0 and ep != 0.0):
                if n_ev < cap:
                    ev_idx[n_ev] = k
                    for i in range(nx):
                        ev_pre[n_ev, i] = x[i]
                for i in range(nx):
                    acc = 0.0
                    for j in range(nx):
                        acc += AR[i, j] * x[j]
                    x_new[i] = acc
                for i in range(nx):
                    x[i] = x_new[i]
                if n_ev < cap:
                    for i in range(nx):
                        ev_post[n_ev, i] = x[i]
                n_ev += 1
        yk = D * ek
        for i in range(nx):
            yk += C[i] * x[i]
        y[k] = yk
        for i in range(nx):
            acc = Bd[i] * ek
            for j in range(nx):
                acc += Ad[i, j] * x[j]
            x_new[i] = acc
        for i in range(nx):
            x[i] = x_new[i]
        if abs(yk) > DIVERGENCE_LIMIT:
            return y, n_ev, k
    return y, n_ev, -1
