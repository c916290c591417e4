"""Pure numpy implementations of the per-iteration elementwise kernels.

Reference backend; the compiled extension in ``_speedups.pyx`` mirrors these
formulas exactly. Sampled trajectory arrays are (n, l), obstacle-stacked
arrays are (m*n, l) with flat index j*n + k for obstacle j at sample k.
"""

import numpy as np


def obstacle_update(x, y, xi_x, xi_y, a, b):
    """Closed-form line-of-sight angle and clipped separation ratio."""
    n = x.shape[0]
    m = xi_x.shape[0] // n if n else 0
    wx = np.tile(x, (m, 1)) - xi_x[:, None]
    wy = np.tile(y, (m, 1)) - xi_y[:, None]
    alpha = np.arctan2(a * wy, b * wx)
    ca, sa = np.cos(alpha), np.sin(alpha)
    num = a * ca * wx + b * sa * wy
    den = (a * ca) ** 2 + (b * sa) ** 2
    d = np.maximum(1.0, num / den)
    return alpha, d


def accel_update(xddot, yddot, a_max):
    """Acceleration direction and magnitude clipped to the bound."""
    alpha_a = np.arctan2(yddot, xddot)
    d_a = np.minimum(np.sqrt(xddot * xddot + yddot * yddot), a_max)
    return alpha_a, d_a


def v_update(xdot, ydot, v_min, v_max):
    """Speed magnitude thresholded into [v_min, v_max]."""
    return np.clip(np.sqrt(xdot * xdot + ydot * ydot), v_min, v_max)


def assemble_g(xi_x, xi_y, alpha, d, alpha_a, d_a, v, psi, a, b):
    """Per-axis penalty targets, block order (obstacle, acceleration, non-holonomic)."""
    mn, l = alpha.shape
    n = v.shape[0]
    g_x = np.empty((mn + 2 * n, l))
    g_y = np.empty((mn + 2 * n, l))
    g_x[:mn] = xi_x[:, None] + a * d * np.cos(alpha)
    g_y[:mn] = xi_y[:, None] + b * d * np.sin(alpha)
    g_x[mn : mn + n] = d_a * np.cos(alpha_a)
    g_y[mn : mn + n] = d_a * np.sin(alpha_a)
    g_x[mn + n :] = v * np.cos(psi)
    g_y[mn + n :] = v * np.sin(psi)
    return g_x, g_y


def residual_vectors(x, y, xdot, ydot, xddot, yddot, psi,
                     xi_x, xi_y, alpha, d, alpha_a, d_a, v, a, b):
    """Per-axis residuals of the penalty constraints at the current iterates."""
    mn = alpha.shape[0]
    n, l = x.shape
    m = mn // n if n else 0
    r_x = np.empty((mn + 2 * n, l))
    r_y = np.empty((mn + 2 * n, l))
    r_x[:mn] = np.tile(x, (m, 1)) - xi_x[:, None] - a * d * np.cos(alpha)
    r_y[:mn] = np.tile(y, (m, 1)) - xi_y[:, None] - b * d * np.sin(alpha)
    r_x[mn : mn + n] = xddot - d_a * np.cos(alpha_a)
    r_y[mn : mn + n] = yddot - d_a * np.sin(alpha_a)
    r_x[mn + n :] = xdot - v * np.cos(psi)
    r_y[mn + n :] = ydot - v * np.sin(psi)
    return r_x, r_y


def tail_core(x, y, xdot, ydot, xddot, yddot, psi,
              xi_x, xi_y, v_min, v_max, a_max, a, b):
    """Like :func:`tail_update` but skips materializing the angle arrays
    (which nothing inside the iteration consumes) and also returns the three
    per-instance squared residual block sums.

    Returns (d, d_a, v, r_x, r_y, g_x, g_y, sq_obs, sq_acc, sq_nonhol).
    """
    mn = xi_x.shape[0]
    n, l = x.shape
    m = mn // n if n else 0

    wx = np.tile(x, (m, 1)) - xi_x[:, None]
    wy = np.tile(y, (m, 1)) - xi_y[:, None]
    py, px = a * wy, b * wx
    r = np.sqrt(px * px + py * py)
    safe = np.where(r > 0.0, r, 1.0)
    ca = np.where(r > 0.0, px / safe, 1.0)
    sa = np.where(r > 0.0, py / safe, 0.0)
    d = np.maximum(1.0, r / (a * b))

    mag = np.sqrt(xddot * xddot + yddot * yddot)
    safe_m = np.where(mag > 0.0, mag, 1.0)
    ca_a = np.where(mag > 0.0, xddot / safe_m, 1.0)
    sa_a = np.where(mag > 0.0, yddot / safe_m, 0.0)
    d_a = np.minimum(mag, a_max)

    v = np.clip(np.sqrt(xdot * xdot + ydot * ydot), v_min, v_max)
    cp, sp = np.cos(psi), np.sin(psi)

    r_x = np.empty((mn + 2 * n, l))
    r_y = np.empty((mn + 2 * n, l))
    g_x = np.empty((mn + 2 * n, l))
    g_y = np.empty((mn + 2 * n, l))
    adca = a * d * ca
    bdsa = b * d * sa
    r_x[:mn] = wx - adca
    r_y[:mn] = wy - bdsa
    g_x[:mn] = xi_x[:, None] + adca
    g_y[:mn] = xi_y[:, None] + bdsa
    daca = d_a * ca_a
    dasa = d_a * sa_a
    r_x[mn : mn + n] = xddot - daca
    r_y[mn : mn + n] = yddot - dasa
    g_x[mn : mn + n] = daca
    g_y[mn : mn + n] = dasa
    vcp = v * cp
    vsp = v * sp
    r_x[mn + n :] = xdot - vcp
    r_y[mn + n :] = ydot - vsp
    g_x[mn + n :] = vcp
    g_y[mn + n :] = vsp

    sq_obs = np.einsum("ij,ij->j", r_x[:mn], r_x[:mn]) + np.einsum(
        "ij,ij->j", r_y[:mn], r_y[:mn]
    )
    sq_acc = np.einsum("ij,ij->j", r_x[mn : mn + n], r_x[mn : mn + n]) + np.einsum(
        "ij,ij->j", r_y[mn : mn + n], r_y[mn : mn + n]
    )
    sq_nonhol = np.einsum("ij,ij->j", r_x[mn + n :], r_x[mn + n :]) + np.einsum(
        "ij,ij->j", r_y[mn + n :], r_y[mn + n :]
    )
    return d, d_a, v, r_x, r_y, g_x, g_y, sq_obs, sq_acc, sq_nonhol


def tail_update(x, y, xdot, ydot, xddot, yddot, psi,
                xi_x, xi_y, v_min, v_max, a_max, a, b):
    """Fused end-of-iteration update: closed-form blocks, residuals, and the
    next iteration's penalty targets in one pass.

    Identical math to the individual kernels; the line-of-sight cosine and
    sine come from the arctan2 arguments algebraically (cos(atan2(p, q)) =
    q/hypot, sin = p/hypot), which also collapses the unconstrained ratio to
    hypot/(a*b). Returns (alpha, d, alpha_a, d_a, v, r_x, r_y, g_x, g_y).
    """
    mn = xi_x.shape[0]
    n, l = x.shape
    m = mn // n if n else 0

    wx = np.tile(x, (m, 1)) - xi_x[:, None]
    wy = np.tile(y, (m, 1)) - xi_y[:, None]
    py, px = a * wy, b * wx
    r = np.sqrt(px * px + py * py)
    alpha = np.arctan2(py, px)
    safe = np.where(r > 0.0, r, 1.0)
    ca = np.where(r > 0.0, px / safe, 1.0)
    sa = np.where(r > 0.0, py / safe, 0.0)
    d = np.maximum(1.0, r / (a * b))

    mag = np.sqrt(xddot * xddot + yddot * yddot)
    alpha_a = np.arctan2(yddot, xddot)
    safe_m = np.where(mag > 0.0, mag, 1.0)
    ca_a = np.where(mag > 0.0, xddot / safe_m, 1.0)
    sa_a = np.where(mag > 0.0, yddot / safe_m, 0.0)
    d_a = np.minimum(mag, a_max)

    v = np.clip(np.sqrt(xdot * xdot + ydot * ydot), v_min, v_max)
    cp, sp = np.cos(psi), np.sin(psi)

    r_x = np.empty((mn + 2 * n, l))
    r_y = np.empty((mn + 2 * n, l))
    g_x = np.empty((mn + 2 * n, l))
    g_y = np.empty((mn + 2 * n, l))
    adca = a * d * ca
    bdsa = b * d * sa
    r_x[:mn] = wx - adca
    r_y[:mn] = wy - bdsa
    g_x[:mn] = xi_x[:, None] + adca
    g_y[:mn] = xi_y[:, None] + bdsa
    daca = d_a * ca_a
    dasa = d_a * sa_a
    r_x[mn : mn + n] = xddot - daca
    r_y[mn : mn + n] = yddot - dasa
    g_x[mn : mn + n] = daca
    g_y[mn : mn + n] = dasa
    vcp = v * cp
    vsp = v * sp
    r_x[mn + n :] = xdot - vcp
    r_y[mn + n :] = ydot - vsp
    g_x[mn + n :] = vcp
    g_y[mn + n :] = vsp
    return alpha, d, alpha_a, d_a, v, r_x, r_y, g_x, g_y
