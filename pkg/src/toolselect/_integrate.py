"""Compiled closed-loop right-hand side and Dormand-Prince 5(4) stepper.

The coupled plant + controller system is stiff-ish for light, short links
(controller gain times B reaches ~1e4 s^-1), so the loop runs under numba.
Output is sampled by landing steps exactly on the grid instead of dense
interpolation; the step-size proposal survives the clipping.
"""

import math

import numpy as np
from numba import njit

from toolselect.dynamics import accel_scalar

OK = 0
STEP_UNDERFLOW = 1
DIVERGED = 2
TOO_MANY_STEPS = 3

STATUS_TEXT = {
    OK: "ok",
    STEP_UNDERFLOW: "step size underflow",
    DIVERGED: "state diverged",
    TOO_MANY_STEPS: "step budget exhausted",
}

DIVERGENCE_BOUND = 1e8

# Dormand-Prince tableau (Hairer, Norsett & Wanner, 1993)
C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
A = np.array(
    [
        [0.0, 0.0, 0.0, 0.0, 0.0],
        [1 / 5, 0.0, 0.0, 0.0, 0.0],
        [3 / 40, 9 / 40, 0.0, 0.0, 0.0],
        [44 / 45, -56 / 15, 32 / 9, 0.0, 0.0],
        [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0.0],
        [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    ]
)
B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
# fifth-order minus embedded fourth-order weights, 7 stages (FSAL)
E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)


@njit(cache=True)
def closed_loop_rhs(y, arm, gains, prec, goals, eta, gamma, pert, out):
    """Write d/dt [theta, theta_dot, u] into ``out``.

    ``gains[k]`` is the partial of task variable k (theta, theta_dot,
    theta_ddot) w.r.t. u; zero blocks switch a term off. ``prec`` holds the
    three goal precisions followed by the control prior precision.
    """
    a1, a2 = accel_scalar(
        arm[0], arm[1], arm[2], arm[3], arm[4],
        y[0], y[1], y[2], y[3], y[4] + pert[0], y[5] + pert[1],
    )
    out[0] = y[2]
    out[1] = y[3]
    out[2] = a1
    out[3] = a2
    dev = np.empty((3, 2))
    dev[0, 0] = y[0] - goals[0, 0]
    dev[0, 1] = y[1] - goals[0, 1]
    dev[1, 0] = y[2] - goals[1, 0]
    dev[1, 1] = y[3] - goals[1, 1]
    dev[2, 0] = a1 - goals[2, 0]
    dev[2, 1] = a2 - goals[2, 1]
    g0 = 0.0
    g1 = 0.0
    for k in range(3):
        w0 = prec[k, 0, 0] * dev[k, 0] + prec[k, 0, 1] * dev[k, 1]
        w1 = prec[k, 1, 0] * dev[k, 0] + prec[k, 1, 1] * dev[k, 1]
        g0 += gains[k, 0, 0] * w0 + gains[k, 1, 0] * w1
        g1 += gains[k, 0, 1] * w0 + gains[k, 1, 1] * w1
    du0 = y[4] - eta[0]
    du1 = y[5] - eta[1]
    g0 += prec[3, 0, 0] * du0 + prec[3, 0, 1] * du1
    g1 += prec[3, 1, 0] * du0 + prec[3, 1, 1] * du1
    out[4] = -gamma * g0
    out[5] = -gamma * g1


@njit(cache=True)
def _rms_scaled(v, y, rtol, atol):
    acc = 0.0
    for i in range(v.shape[0]):
        s = atol + rtol * abs(y[i])
        acc += (v[i] / s) ** 2
    return math.sqrt(acc / v.shape[0])


@njit(cache=True)
def dopri5(y0, t_grid, rtol, atol, max_steps, arm, gains, prec, goals, eta, gamma, pert):
    """Integrate the closed loop, sampling on ``t_grid``.

    Returns ``(samples, status, t_fail, n_steps)``; rows of ``samples`` past a
    failure are left as NaN.
    """
    n = y0.shape[0]
    n_out = t_grid.shape[0]
    samples = np.full((n_out, n), np.nan)
    samples[0, :] = y0
    t = t_grid[0]
    t_end = t_grid[n_out - 1]
    y = y0.copy()
    k = np.zeros((7, n))
    closed_loop_rhs(y, arm, gains, prec, goals, eta, gamma, pert, k[0])

    # initial step selection as in Hairer's RK codes
    d0 = _rms_scaled(y, y, rtol, atol)
    d1 = _rms_scaled(k[0], y, rtol, atol)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    y1 = y + h0 * k[0]
    f1 = np.empty(n)
    closed_loop_rhs(y1, arm, gains, prec, goals, eta, gamma, pert, f1)
    d2 = _rms_scaled(f1 - k[0], y, rtol, atol) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    h = min(100 * h0, h1, t_end - t)

    y_stage = np.empty(n)
    y_new = np.empty(n)
    err = np.empty(n)
    next_idx = 1
    steps = 0
    while next_idx < n_out:
        if steps >= max_steps:
            return samples, TOO_MANY_STEPS, t, steps
        h_min = 10.0 * (np.nextafter(t, np.inf) - t)
        t_target = t_grid[next_idx]
        clipped = False
        h_step = h
        if t + h_step >= t_target:
            h_step = t_target - t
            clipped = True
        elif t + 2.0 * h_step > t_target:
            # split the remainder rather than leave a sliver before the grid point
            h_step = 0.5 * (t_target - t)
        rejected = False
        while True:
            if h_step < h_min:
                return samples, STEP_UNDERFLOW, t, steps
            for s in range(1, 6):
                for i in range(n):
                    acc = y[i]
                    for j in range(s):
                        acc += h_step * A[s, j] * k[j, i]
                    y_stage[i] = acc
                closed_loop_rhs(y_stage, arm, gains, prec, goals, eta, gamma, pert, k[s])
            for i in range(n):
                acc = y[i]
                for j in range(6):
                    acc += h_step * B5[j] * k[j, i]
                y_new[i] = acc
            closed_loop_rhs(y_new, arm, gains, prec, goals, eta, gamma, pert, k[6])
            for i in range(n):
                acc = 0.0
                for j in range(7):
                    acc += E[j] * k[j, i]
                err[i] = h_step * acc
            en = 0.0
            for i in range(n):
                sc = atol + rtol * max(abs(y[i]), abs(y_new[i]))
                en += (err[i] / sc) ** 2
            en = math.sqrt(en / n)
            steps += 1
            if math.isfinite(en) and en < 1.0:
                if en == 0.0:
                    factor = 10.0
                else:
                    factor = min(10.0, 0.9 * en ** -0.2)
                if rejected:
                    factor = min(1.0, factor)
                h_next = h_step * factor
                break
            if math.isfinite(en):
                shrink = max(0.2, 0.9 * en ** -0.2)
            else:
                shrink = 0.2
            h_step *= shrink
            clipped = False
            rejected = True
            if steps >= max_steps:
                return samples, TOO_MANY_STEPS, t, steps
        if clipped:
            t = t_target
        else:
            t = t + h_step
        for i in range(n):
            y[i] = y_new[i]
            k[0, i] = k[6, i]
            if not math.isfinite(y[i]) or abs(y[i]) > DIVERGENCE_BOUND:
                return samples, DIVERGED, t, steps
        if clipped:
            samples[next_idx, :] = y
            next_idx += 1
            h = max(h, h_next)
        else:
            h = h_next
    return samples, OK, t, steps
