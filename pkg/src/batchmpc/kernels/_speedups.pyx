# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled per-iteration kernels; formula-identical to ``_numpy``."""

import numpy as np

cimport numpy as cnp
from libc.math cimport atan2, cos, sin, sqrt

cnp.import_array()


def obstacle_update(double[:, ::1] x, double[:, ::1] y,
                    double[::1] xi_x, double[::1] xi_y,
                    double a, double b):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t l = x.shape[1]
    cdef Py_ssize_t mn = xi_x.shape[0]
    alpha_arr = np.empty((mn, l), dtype=np.float64)
    d_arr = np.empty((mn, l), dtype=np.float64)
    cdef double[:, ::1] alpha = alpha_arr
    cdef double[:, ::1] d = d_arr
    cdef Py_ssize_t j, k, c
    cdef double wx, wy, al, ca, sa, num, den, dd
    for j in range(mn):
        k = j % n
        for c in range(l):
            wx = x[k, c] - xi_x[j]
            wy = y[k, c] - xi_y[j]
            al = atan2(a * wy, b * wx)
            ca = cos(al)
            sa = sin(al)
            num = a * ca * wx + b * sa * wy
            den = (a * ca) * (a * ca) + (b * sa) * (b * sa)
            dd = num / den
            if dd < 1.0:
                dd = 1.0
            alpha[j, c] = al
            d[j, c] = dd
    return alpha_arr, d_arr


def accel_update(double[:, ::1] xddot, double[:, ::1] yddot, double a_max):
    cdef Py_ssize_t n = xddot.shape[0]
    cdef Py_ssize_t l = xddot.shape[1]
    alpha_arr = np.empty((n, l), dtype=np.float64)
    d_arr = np.empty((n, l), dtype=np.float64)
    cdef double[:, ::1] alpha_a = alpha_arr
    cdef double[:, ::1] d_a = d_arr
    cdef Py_ssize_t k, c
    cdef double ax, ay, mag
    for k in range(n):
        for c in range(l):
            ax = xddot[k, c]
            ay = yddot[k, c]
            alpha_a[k, c] = atan2(ay, ax)
            mag = sqrt(ax * ax + ay * ay)
            if mag > a_max:
                mag = a_max
            d_a[k, c] = mag
    return alpha_arr, d_arr


def v_update(double[:, ::1] xdot, double[:, ::1] ydot, double v_min, double v_max):
    cdef Py_ssize_t n = xdot.shape[0]
    cdef Py_ssize_t l = xdot.shape[1]
    v_arr = np.empty((n, l), dtype=np.float64)
    cdef double[:, ::1] v = v_arr
    cdef Py_ssize_t k, c
    cdef double s
    for k in range(n):
        for c in range(l):
            s = sqrt(xdot[k, c] * xdot[k, c] + ydot[k, c] * ydot[k, c])
            if s < v_min:
                s = v_min
            elif s > v_max:
                s = v_max
            v[k, c] = s
    return v_arr


def assemble_g(double[::1] xi_x, double[::1] xi_y,
               double[:, ::1] alpha, double[:, ::1] d,
               double[:, ::1] alpha_a, double[:, ::1] d_a,
               double[:, ::1] v, double[:, ::1] psi,
               double a, double b):
    cdef Py_ssize_t mn = alpha.shape[0]
    cdef Py_ssize_t l = alpha.shape[1]
    cdef Py_ssize_t n = v.shape[0]
    gx_arr = np.empty((mn + 2 * n, l), dtype=np.float64)
    gy_arr = np.empty((mn + 2 * n, l), dtype=np.float64)
    cdef double[:, ::1] g_x = gx_arr
    cdef double[:, ::1] g_y = gy_arr
    cdef Py_ssize_t j, k, c
    cdef double ad, ang
    for j in range(mn):
        for c in range(l):
            ang = alpha[j, c]
            ad = d[j, c]
            g_x[j, c] = xi_x[j] + a * ad * cos(ang)
            g_y[j, c] = xi_y[j] + b * ad * sin(ang)
    for k in range(n):
        for c in range(l):
            ang = alpha_a[k, c]
            ad = d_a[k, c]
            g_x[mn + k, c] = ad * cos(ang)
            g_y[mn + k, c] = ad * sin(ang)
            ang = psi[k, c]
            ad = v[k, c]
            g_x[mn + n + k, c] = ad * cos(ang)
            g_y[mn + n + k, c] = ad * sin(ang)
    return gx_arr, gy_arr


def tail_core(double[:, ::1] x, double[:, ::1] y,
              double[:, ::1] xdot, double[:, ::1] ydot,
              double[:, ::1] xddot, double[:, ::1] yddot,
              double[:, ::1] psi,
              double[::1] xi_x, double[::1] xi_y,
              double v_min, double v_max, double a_max,
              double a, double b):
    """tail_update without angle materialization, plus per-instance squared
    residual block sums; see the numpy twin."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t l = x.shape[1]
    cdef Py_ssize_t mn = xi_x.shape[0]
    d_arr = np.empty((mn, l), dtype=np.float64)
    d_a_arr = np.empty((n, l), dtype=np.float64)
    v_arr = np.empty((n, l), dtype=np.float64)
    rx_arr = np.empty((mn + 2 * n, l), dtype=np.float64)
    ry_arr = np.empty((mn + 2 * n, l), dtype=np.float64)
    gx_arr = np.empty((mn + 2 * n, l), dtype=np.float64)
    gy_arr = np.empty((mn + 2 * n, l), dtype=np.float64)
    sq_obs_arr = np.zeros(l, dtype=np.float64)
    sq_acc_arr = np.zeros(l, dtype=np.float64)
    sq_nonhol_arr = np.zeros(l, dtype=np.float64)
    cdef double[:, ::1] d = d_arr
    cdef double[:, ::1] d_a = d_a_arr
    cdef double[:, ::1] v = v_arr
    cdef double[:, ::1] r_x = rx_arr
    cdef double[:, ::1] r_y = ry_arr
    cdef double[:, ::1] g_x = gx_arr
    cdef double[:, ::1] g_y = gy_arr
    cdef double[::1] sq_obs = sq_obs_arr
    cdef double[::1] sq_acc = sq_acc_arr
    cdef double[::1] sq_nonhol = sq_nonhol_arr
    cdef Py_ssize_t j, k, c
    cdef double wx, wy, px, py, r, ca, sa, dd, adca, bdsa
    cdef double ax, ay, mag, caa, saa, daca, dasa
    cdef double s, cp, sp, vcp, vsp, rx, ry
    for j in range(mn):
        k = j % n
        for c in range(l):
            wx = x[k, c] - xi_x[j]
            wy = y[k, c] - xi_y[j]
            px = b * wx
            py = a * wy
            r = sqrt(px * px + py * py)
            if r > 0.0:
                ca = px / r
                sa = py / r
            else:
                ca = 1.0
                sa = 0.0
            dd = r / (a * b)
            if dd < 1.0:
                dd = 1.0
            d[j, c] = dd
            adca = a * dd * ca
            bdsa = b * dd * sa
            rx = wx - adca
            ry = wy - bdsa
            r_x[j, c] = rx
            r_y[j, c] = ry
            sq_obs[c] += rx * rx + ry * ry
            g_x[j, c] = xi_x[j] + adca
            g_y[j, c] = xi_y[j] + bdsa
    for k in range(n):
        for c in range(l):
            ax = xddot[k, c]
            ay = yddot[k, c]
            mag = sqrt(ax * ax + ay * ay)
            if mag > 0.0:
                caa = ax / mag
                saa = ay / mag
            else:
                caa = 1.0
                saa = 0.0
            dd = mag if mag < a_max else a_max
            d_a[k, c] = dd
            daca = dd * caa
            dasa = dd * saa
            rx = ax - daca
            ry = ay - dasa
            r_x[mn + k, c] = rx
            r_y[mn + k, c] = ry
            sq_acc[c] += rx * rx + ry * ry
            g_x[mn + k, c] = daca
            g_y[mn + k, c] = dasa

            s = sqrt(xdot[k, c] * xdot[k, c] + ydot[k, c] * ydot[k, c])
            if s < v_min:
                s = v_min
            elif s > v_max:
                s = v_max
            v[k, c] = s
            cp = cos(psi[k, c])
            sp = sin(psi[k, c])
            vcp = s * cp
            vsp = s * sp
            rx = xdot[k, c] - vcp
            ry = ydot[k, c] - vsp
            r_x[mn + n + k, c] = rx
            r_y[mn + n + k, c] = ry
            sq_nonhol[c] += rx * rx + ry * ry
            g_x[mn + n + k, c] = vcp
            g_y[mn + n + k, c] = vsp
    return (d_arr, d_a_arr, v_arr, rx_arr, ry_arr, gx_arr, gy_arr,
            sq_obs_arr, sq_acc_arr, sq_nonhol_arr)


def tail_update(double[:, ::1] x, double[:, ::1] y,
                double[:, ::1] xdot, double[:, ::1] ydot,
                double[:, ::1] xddot, double[:, ::1] yddot,
                double[:, ::1] psi,
                double[::1] xi_x, double[::1] xi_y,
                double v_min, double v_max, double a_max,
                double a, double b):
    """Fused closed-form updates + residuals + next-iteration targets.

    Same math as the individual kernels; see the numpy twin for the
    algebraic identities used to avoid per-element sin/cos calls.
    """
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t l = x.shape[1]
    cdef Py_ssize_t mn = xi_x.shape[0]
    alpha_arr = np.empty((mn, l), dtype=np.float64)
    d_arr = np.empty((mn, l), dtype=np.float64)
    alpha_a_arr = np.empty((n, l), dtype=np.float64)
    d_a_arr = np.empty((n, l), dtype=np.float64)
    v_arr = np.empty((n, l), dtype=np.float64)
    rx_arr = np.empty((mn + 2 * n, l), dtype=np.float64)
    ry_arr = np.empty((mn + 2 * n, l), dtype=np.float64)
    gx_arr = np.empty((mn + 2 * n, l), dtype=np.float64)
    gy_arr = np.empty((mn + 2 * n, l), dtype=np.float64)
    cdef double[:, ::1] alpha = alpha_arr
    cdef double[:, ::1] d = d_arr
    cdef double[:, ::1] alpha_a = alpha_a_arr
    cdef double[:, ::1] d_a = d_a_arr
    cdef double[:, ::1] v = v_arr
    cdef double[:, ::1] r_x = rx_arr
    cdef double[:, ::1] r_y = ry_arr
    cdef double[:, ::1] g_x = gx_arr
    cdef double[:, ::1] g_y = gy_arr
    cdef Py_ssize_t j, k, c
    cdef double wx, wy, px, py, r, ca, sa, dd, adca, bdsa
    cdef double ax, ay, mag, caa, saa, daca, dasa
    cdef double s, cp, sp, vcp, vsp
    for j in range(mn):
        k = j % n
        for c in range(l):
            wx = x[k, c] - xi_x[j]
            wy = y[k, c] - xi_y[j]
            px = b * wx
            py = a * wy
            r = sqrt(px * px + py * py)
            alpha[j, c] = atan2(py, px)
            if r > 0.0:
                ca = px / r
                sa = py / r
            else:
                ca = 1.0
                sa = 0.0
            dd = r / (a * b)
            if dd < 1.0:
                dd = 1.0
            d[j, c] = dd
            adca = a * dd * ca
            bdsa = b * dd * sa
            r_x[j, c] = wx - adca
            r_y[j, c] = wy - bdsa
            g_x[j, c] = xi_x[j] + adca
            g_y[j, c] = xi_y[j] + bdsa
    for k in range(n):
        for c in range(l):
            ax = xddot[k, c]
            ay = yddot[k, c]
            mag = sqrt(ax * ax + ay * ay)
            alpha_a[k, c] = atan2(ay, ax)
            if mag > 0.0:
                caa = ax / mag
                saa = ay / mag
            else:
                caa = 1.0
                saa = 0.0
            dd = mag if mag < a_max else a_max
            d_a[k, c] = dd
            daca = dd * caa
            dasa = dd * saa
            r_x[mn + k, c] = ax - daca
            r_y[mn + k, c] = ay - dasa
            g_x[mn + k, c] = daca
            g_y[mn + k, c] = dasa

            s = sqrt(xdot[k, c] * xdot[k, c] + ydot[k, c] * ydot[k, c])
            if s < v_min:
                s = v_min
            elif s > v_max:
                s = v_max
            v[k, c] = s
            cp = cos(psi[k, c])
            sp = sin(psi[k, c])
            vcp = s * cp
            vsp = s * sp
            r_x[mn + n + k, c] = xdot[k, c] - vcp
            r_y[mn + n + k, c] = ydot[k, c] - vsp
            g_x[mn + n + k, c] = vcp
            g_y[mn + n + k, c] = vsp
    return alpha_arr, d_arr, alpha_a_arr, d_a_arr, v_arr, rx_arr, ry_arr, gx_arr, gy_arr


def residual_vectors(double[:, ::1] x, double[:, ::1] y,
                     double[:, ::1] xdot, double[:, ::1] ydot,
                     double[:, ::1] xddot, double[:, ::1] yddot,
                     double[:, ::1] psi,
                     double[::1] xi_x, double[::1] xi_y,
                     double[:, ::1] alpha, double[:, ::1] d,
                     double[:, ::1] alpha_a, double[:, ::1] d_a,
                     double[:, ::1] v, double a, double b):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t l = x.shape[1]
    cdef Py_ssize_t mn = alpha.shape[0]
    rx_arr = np.empty((mn + 2 * n, l), dtype=np.float64)
    ry_arr = np.empty((mn + 2 * n, l), dtype=np.float64)
    cdef double[:, ::1] r_x = rx_arr
    cdef double[:, ::1] r_y = ry_arr
    cdef Py_ssize_t j, k, c
    cdef double ang, ad
    for j in range(mn):
        k = j % n
        for c in range(l):
            ang = alpha[j, c]
            ad = d[j, c]
            r_x[j, c] = x[k, c] - xi_x[j] - a * ad * cos(ang)
            r_y[j, c] = y[k, c] - xi_y[j] - b * ad * sin(ang)
    for k in range(n):
        for c in range(l):
            ang = alpha_a[k, c]
            ad = d_a[k, c]
            r_x[mn + k, c] = xddot[k, c] - ad * cos(ang)
            r_y[mn + k, c] = yddot[k, c] - ad * sin(ang)
            ang = psi[k, c]
            ad = v[k, c]
            r_x[mn + n + k, c] = xdot[k, c] - ad * cos(ang)
            r_y[mn + n + k, c] = ydot[k, c] - ad * sin(ang)
    return rx_arr, ry_arr
