# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the loops in ``_pure.py`` (same signatures and results)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fmod

cnp.import_array()

DEF MODE_IDLE = 0
DEF MODE_MAGNETIZE = 1
DEF MODE_DEMAGNETIZE = 2


def newton_element_terms(double[:, :, ::1] grad, double[::1] area, double[:, ::1] a_loc,
                         double[::1] nu, double[::1] dnu):
    cdef Py_ssize_t m = grad.shape[0], e
    cdef int i, j
    cdef double gx, gy, s
    cdef double v[3]
    jac_np = np.empty((m, 3, 3))
    res_np = np.empty((m, 3))
    cdef double[:, :, ::1] jac = jac_np
    cdef double[:, ::1] res = res_np
    for e in range(m):
        gx = grad[e, 0, 0] * a_loc[e, 0] + grad[e, 1, 0] * a_loc[e, 1] + grad[e, 2, 0] * a_loc[e, 2]
        gy = grad[e, 0, 1] * a_loc[e, 0] + grad[e, 1, 1] * a_loc[e, 1] + grad[e, 2, 1] * a_loc[e, 2]
        for i in range(3):
            v[i] = grad[e, i, 0] * gx + grad[e, i, 1] * gy
            res[e, i] = area[e] * nu[e] * v[i]
        for i in range(3):
            for j in range(3):
                s = grad[e, i, 0] * grad[e, j, 0] + grad[e, i, 1] * grad[e, j, 1]
                jac[e, i, j] = area[e] * (nu[e] * s + 2.0 * dnu[e] * v[i] * v[j])
    return jac_np, res_np


cdef inline void _fold(double theta, double step, int n_ang, int* k, double* w, double* sgn) nogil:
    cdef double t = fmod(theta, 360.0)
    if t < 0:
        t += 360.0
    sgn[0] = 1.0
    if t > 180.0:
        t = 360.0 - t
        sgn[0] = -1.0
    cdef double x = t / step
    cdef int kk = <int>x
    if kk > n_ang - 2:
        kk = n_ang - 2
    k[0] = kk
    w[0] = x - kk


cdef inline double _current(double psi_v, int k, double w, double[::1] cur, double[:, ::1] psi,
                            int* r_out, double* u_out) nogil:
    cdef int n_cur = cur.shape[0], r
    cdef double lo = (1.0 - w) * psi[0, k] + w * psi[0, k + 1], hi, u
    for r in range(n_cur - 1):
        hi = (1.0 - w) * psi[r + 1, k] + w * psi[r + 1, k + 1]
        if psi_v <= hi or r == n_cur - 2:
            u = (psi_v - lo) / (hi - lo)
            r_out[0] = r
            u_out[0] = u
            return cur[r] + u * (cur[r + 1] - cur[r])
        lo = hi
    r_out[0] = n_cur - 2
    u_out[0] = 1.0
    return cur[n_cur - 1]


cdef inline double _rhs(double y, double th, double v, double r_phase, double step, int n_ang,
                        double[::1] cur, double[:, ::1] psi) nogil:
    cdef int k, r
    cdef double w, sgn, u
    _fold(th, step, n_ang, &k, &w, &sgn)
    return v - r_phase * _current(y, k, w, cur, psi, &r, &u)


def chc_simulate(currents, double angle_step, psi, torque, double r_phase, double v_dc,
                 double i_lo, double i_hi, double on_deg, double span_deg, double theta0,
                 double omega_e, double dt, Py_ssize_t n_steps, offsets, double i_abort):
    cdef double[::1] cur = np.ascontiguousarray(currents, dtype=np.float64)
    cdef double[:, ::1] ps = np.ascontiguousarray(psi, dtype=np.float64)
    cdef double[:, ::1] tq = np.ascontiguousarray(torque, dtype=np.float64)
    cdef double[::1] offs = np.ascontiguousarray(offsets, dtype=np.float64)
    cdef int n_ang = ps.shape[1], n_ph = offs.shape[0], p, k, r, m, in_cond
    cdef Py_ssize_t n

    out_theta_np = np.zeros(n_steps + 1)
    out_v_np = np.zeros((n_steps + 1, n_ph))
    out_i_np = np.zeros((n_steps + 1, n_ph))
    out_psi_np = np.zeros((n_steps + 1, n_ph))
    out_t_np = np.zeros((n_steps + 1, n_ph))
    out_mode_np = np.zeros((n_steps + 1, n_ph), dtype=np.int8)
    cdef double[::1] o_th = out_theta_np
    cdef double[:, ::1] o_v = out_v_np, o_i = out_i_np, o_psi = out_psi_np, o_t = out_t_np
    cdef cnp.int8_t[:, ::1] o_m = out_mode_np

    state_np = np.zeros(n_ph)
    cur_np = np.zeros(n_ph)
    mode_np = np.zeros(n_ph, dtype=np.int32)
    cdef double[::1] psi_s = state_np, ic = cur_np
    cdef int[::1] mode = mode_np
    cdef double half = 0.5 * dt, th, thp, th1, v, y, k1, k2, k3, k4, dth, i, w, sgn, u, t0, t1, ph

    o_th[0] = theta0
    for n in range(n_steps):
        th = theta0 + omega_e * dt * n
        for p in range(n_ph):
            thp = th + offs[p]
            ph = fmod(thp - on_deg, 360.0)
            if ph < 0:
                ph += 360.0
            in_cond = ph < span_deg
            i = ic[p]
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
            if m == MODE_MAGNETIZE:
                v = v_dc
            elif m == MODE_DEMAGNETIZE:
                v = -v_dc
            else:
                v = 0.0
            o_v[n, p] = v
            o_m[n, p] = m
            if m == MODE_IDLE and psi_s[p] <= 0.0:
                continue
            y = psi_s[p]
            dth = omega_e * half
            k1 = _rhs(y, thp, v, r_phase, angle_step, n_ang, cur, ps)
            k2 = _rhs(y + half * k1, thp + dth, v, r_phase, angle_step, n_ang, cur, ps)
            k3 = _rhs(y + half * k2, thp + dth, v, r_phase, angle_step, n_ang, cur, ps)
            k4 = _rhs(y + dt * k3, thp + 2 * dth, v, r_phase, angle_step, n_ang, cur, ps)
            y += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            if y <= 0.0:
                y = 0.0
                if not in_cond:
                    mode[p] = MODE_IDLE
            psi_s[p] = y
        th1 = theta0 + omega_e * dt * (n + 1)
        o_th[n + 1] = th1
        for p in range(n_ph):
            _fold(th1 + offs[p], angle_step, n_ang, &k, &w, &sgn)
            i = _current(psi_s[p], k, w, cur, ps, &r, &u)
            if i < 0.0:
                i = 0.0
            ic[p] = i
            o_i[n + 1, p] = i
            o_psi[n + 1, p] = psi_s[p]
            t0 = (1.0 - w) * tq[r, k] + w * tq[r, k + 1]
            t1 = (1.0 - w) * tq[r + 1, k] + w * tq[r + 1, k + 1]
            o_t[n + 1, p] = sgn * ((1.0 - u) * t0 + u * t1)
            if i > i_abort:
                return 1, n + 1, out_theta_np, out_v_np, out_i_np, out_psi_np, out_t_np, out_mode_np
    if n_steps:
        out_v_np[n_steps] = out_v_np[n_steps - 1]
        out_mode_np[n_steps] = out_mode_np[n_steps - 1]
    return 0, n_steps, out_theta_np, out_v_np, out_i_np, out_psi_np, out_t_np, out_mode_np
