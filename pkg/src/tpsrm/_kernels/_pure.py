"""Reference implementations of the hot loops (used when the extension is absent)."""

from __future__ import annotations

import numpy as np

MODE_IDLE, MODE_MAGNETIZE, MODE_DEMAGNETIZE = 0, 1, 2
STATUS_OK, STATUS_OVERCURRENT = 0, 1


def newton_element_terms(grad, area, a_loc, nu, dnu):
    """Element Jacobian blocks ``(m, 3, 3)`` and residual terms ``(m, 3)``.

    ``grad`` holds the shape-function gradients ``(m, 3, 2)``; the Jacobian of
    ``sum area * nu(|grad A|^2) * grad N_i . grad A`` is
    ``area * (nu * g_i.g_j + 2 nu' (g_i.grad A)(g_j.grad A))``.
    """
    ga = np.einsum("mij,mi->mj", grad, a_loc)
    v = np.einsum("mij,mj->mi", grad, ga)
    gg = np.einsum("mij,mkj->mik", grad, grad)
    jac = area[:, None, None] * (nu[:, None, None] * gg
                                 + 2.0 * dnu[:, None, None] * v[:, :, None] * v[:, None, :])
    res = (area * nu)[:, None] * v
    return jac, res


def _fold(theta, step, n_ang):
    t = theta % 360.0
    sgn = 1.0
    if t > 180.0:
        t = 360.0 - t
        sgn = -1.0
    x = t / step
    k = int(x)
    if k > n_ang - 2:
        k = n_ang - 2
    return k, x - k, sgn


def _current(psi_v, k, w, currents, psi):
    """Invert the (piecewise-linear in i) flux map at fixed angle cell."""
    n_cur = len(currents)
    lo = (1.0 - w) * psi[0][k] + w * psi[0][k + 1]
    for r in range(n_cur - 1):
        hi = (1.0 - w) * psi[r + 1][k] + w * psi[r + 1][k + 1]
        if psi_v <= hi or r == n_cur - 2:
            u = (psi_v - lo) / (hi - lo)
            return currents[r] + u * (currents[r + 1] - currents[r]), r, u
        lo = hi
    return currents[-1], n_cur - 2, 1.0  # pragma: no cover


def _torque(r, u, k, w, tq):
    t0 = (1.0 - w) * tq[r][k] + w * tq[r][k + 1]
    t1 = (1.0 - w) * tq[r + 1][k] + w * tq[r + 1][k + 1]
    return (1.0 - u) * t0 + u * t1


def chc_simulate(currents, angle_step, psi, torque, r_phase, v_dc, i_lo, i_hi,
                 on_deg, span_deg, theta0, omega_e, dt, n_steps, offsets, i_abort):
    """Fixed-step RK4 of ``dpsi/dt = v - R i`` for each phase under hard chopping.

    Angles are electrical degrees; ``omega_e`` is in electrical deg/s.  The
    maps cover one stroke ``[0, 180]`` on a uniform grid and are mirrored for
    the other half period.  Returns ``(status, step_reached, theta, v, i,
    psi, torque, mode)`` with per-step arrays of shape ``(n_steps + 1, n_ph)``.
    """
    currents = [float(c) for c in currents]
    psi_t = [list(map(float, row)) for row in np.asarray(psi)]
    tq_t = [list(map(float, row)) for row in np.asarray(torque)]
    n_ang = len(psi_t[0])
    n_ph = len(offsets)
    offs = [float(o) for o in offsets]

    out_theta = np.zeros(n_steps + 1)
    out_v = np.zeros((n_steps + 1, n_ph))
    out_i = np.zeros((n_steps + 1, n_ph))
    out_psi = np.zeros((n_steps + 1, n_ph))
    out_t = np.zeros((n_steps + 1, n_ph))
    out_mode = np.zeros((n_steps + 1, n_ph), dtype=np.int8)

    psi_s = [0.0] * n_ph
    cur = [0.0] * n_ph
    mode = [MODE_IDLE] * n_ph
    out_theta[0] = theta0
    half = 0.5 * dt

    def f(p, th, v):
        k, w, _ = _fold(th, angle_step, n_ang)
        i, _, _ = _current(p, k, w, currents, psi_t)
        return v - r_phase * i

    for n in range(n_steps):
        th = theta0 + omega_e * dt * n
        for p in range(n_ph):
            thp = th + offs[p]
            in_cond = ((thp - on_deg) % 360.0) < span_deg
            i = cur[p]
            m = mode[p]
            if in_cond:
                if i > i_hi:
                    m = MODE_DEMAGNETIZE
                elif i < i_lo:
                    m = MODE_MAGNETIZE
                elif m == MODE_IDLE:
                    m = MODE_MAGNETIZE
            else:
                m = MODE_DEMAGNETIZE if psi_s[p] > 0.0 else MODE_IDLE
            mode[p] = m
            v = v_dc if m == MODE_MAGNETIZE else (-v_dc if m == MODE_DEMAGNETIZE else 0.0)
            out_v[n, p] = v
            out_mode[n, p] = m
            if m == MODE_IDLE and psi_s[p] <= 0.0:
                continue
            y = psi_s[p]
            dth = omega_e * half
            k1 = f(y, thp, v)
            k2 = f(y + half * k1, thp + dth, v)
            k3 = f(y + half * k2, thp + dth, v)
            k4 = f(y + dt * k3, thp + 2 * dth, v)
            y += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            if y <= 0.0:
                y = 0.0
                if not in_cond:
                    mode[p] = MODE_IDLE
            psi_s[p] = y
        th1 = theta0 + omega_e * dt * (n + 1)
        out_theta[n + 1] = th1
        for p in range(n_ph):
            k, w, sgn = _fold(th1 + offs[p], angle_step, n_ang)
            i, r, u = _current(psi_s[p], k, w, currents, psi_t)
            if i < 0.0:
                i = 0.0
            cur[p] = i
            out_i[n + 1, p] = i
            out_psi[n + 1, p] = psi_s[p]
            out_t[n + 1, p] = sgn * _torque(r, u, k, w, tq_t)
            if i > i_abort:
                return STATUS_OVERCURRENT, n + 1, out_theta, out_v, out_i, out_psi, out_t, out_mode
    out_v[n_steps] = out_v[n_steps - 1] if n_steps else 0.0
    out_mode[n_steps] = out_mode[n_steps - 1] if n_steps else 0
    return STATUS_OK, n_steps, out_theta, out_v, out_i, out_psi, out_t, out_mode

