"""Taylor-series integrator for the six-variable classical flow.

The right-hand side is a cubic polynomial, so the Taylor coefficients of the
solution follow from Cauchy products of lower-order coefficients. Step sizes
use the Jorba-Zou rule on the last two coefficients; samples inside a step are
read off the step polynomial, which is exactly as accurate as the step end.

State layout everywhere: (Q1, P1, Q2, P2, Q3, P3).
"""
from __future__ import annotations

import math

import numba
import numpy as np


@numba.njit(cache=True)
def taylor_coefficients(y, U, J, eps, order, x, S):
    """Fill ``x[i, n]`` (n = 0..order) with the Taylor coefficients of component i."""
    c = J / math.sqrt(2.0)
    for i in range(6):
        x[i, 0] = y[i]
    for n in range(order):
        s = 0.0
        for k in range(3):
            acc = 0.0
            qk = 2 * k
            pk = 2 * k + 1
            for j in range(n + 1):
                acc += x[qk, j] * x[qk, n - j] + x[pk, j] * x[pk, n - j]
            if k == 1:
                s -= acc
            else:
                s += acc
        S[n] = s
        for k in range(3):
            qk = 2 * k
            pk = 2 * k + 1
            sig = -1.0 if k == 1 else 1.0
            tilt = -eps if k == 0 else (eps if k == 2 else 0.0)
            aq = tilt * x[pk, n]
            ap = tilt * x[qk, n]
            for j in range(n + 1):
                a = U * sig * S[j]
                aq += a * x[pk, n - j]
                ap += a * x[qk, n - j]
            if k == 1:
                nq = x[0, n] + x[4, n]
                npp = x[1, n] + x[5, n]
            else:
                nq = x[2, n]
                npp = x[3, n]
            x[qk, n + 1] = (aq + c * npp) / (n + 1)
            x[pk, n + 1] = -(ap + c * nq) / (n + 1)


@numba.njit(cache=True)
def step_size(x, y, order, atol, rtol):
    ymax = 0.0
    for i in range(6):
        ymax = max(ymax, abs(y[i]))
    tol = max(atol, rtol * ymax)
    a = 0.0
    b = 0.0
    for i in range(6):
        a = max(a, abs(x[i, order - 1]))
        b = max(b, abs(x[i, order]))
    h = np.inf
    if a > 0.0:
        h = min(h, (tol / a) ** (1.0 / (order - 1)))
    if b > 0.0:
        h = min(h, (tol / b) ** (1.0 / order))
    return h


@numba.njit(cache=True)
def evaluate(x, order, h, out):
    for i in range(6):
        v = x[i, order]
        for n in range(order - 1, -1, -1):
            v = v * h + x[i, n]
        out[i] = v


@numba.njit(cache=True)
def run(y0, U, J, eps, t_final, sample_dt, order, atol, rtol, h_min):
    """Integrate to ``t_final`` and sample every ``sample_dt``.

    Returns (samples, steps, status, t_fail): status 0 ok, 1 non-finite state,
    2 step size below ``h_min``.
    """
    n_samples = int(math.floor(t_final / sample_dt + 1e-9)) + 1 if sample_dt > 0 else 1
    out = np.empty((n_samples, 6))
    for i in range(6):
        out[0, i] = y0[i]
    x = np.zeros((6, order + 1))
    S = np.zeros(order + 1)
    y = y0.copy()
    tmp = np.empty(6)
    t = 0.0
    k = 1
    steps = 0
    while k < n_samples:
        taylor_coefficients(y, U, J, eps, order, x, S)
        h = step_size(x, y, order, atol, rtol)
        if h == np.inf:
            # all higher coefficients vanish: the state is an equilibrium
            h = t_final - t + sample_dt
        if h < h_min:
            return out[:k], steps, 2, t
        while k < n_samples and k * sample_dt <= t + h:
            evaluate(x, order, k * sample_dt - t, tmp)
            for i in range(6):
                out[k, i] = tmp[i]
            k += 1
        evaluate(x, order, h, y)
        t += h
        steps += 1
        for i in range(6):
            if not np.isfinite(y[i]):
                return out[:k], steps, 1, t
    return out, steps, 0, t


@numba.njit(cache=True)
def flow(y0, U, J, eps, dt, order, atol, rtol):
    """State after exactly ``dt`` (the last step is shortened to land on it)."""
    x = np.zeros((6, order + 1))
    S = np.zeros(order + 1)
    y = y0.copy()
    t = 0.0
    while t < dt:
        taylor_coefficients(y, U, J, eps, order, x, S)
        h = min(step_size(x, y, order, atol, rtol), dt - t)
        evaluate(x, order, h, y)
        t += h
    return y


@numba.njit(cache=True)
def _phi32_offset(y, phi_section):
    # phase of well 3 relative to well 2, minus the section phase, wrapped to (-pi, pi]
    phi = math.atan2(y[5] * y[2] - y[4] * y[3], y[4] * y[2] + y[5] * y[3]) - phi_section
    return math.pi - ((math.pi - phi) % (2.0 * math.pi))


@numba.njit(cache=True)
def bisect_crossing(y0, U, J, eps, dt, phi_section, tol, order, atol, rtol):
    """Bisection in time on [0, dt] for the zero of the wrapped phi32 offset.

    The bracket must hold a sign change; returns (state, tau).
    """
    lo = 0.0
    hi = dt
    f_lo = _phi32_offset(y0, phi_section)
    y = y0.copy()
    tau = 0.0
    for _ in range(200):
        tau = 0.5 * (lo + hi)
        y = flow(y0, U, J, eps, tau, order, atol, rtol)
        f = _phi32_offset(y, phi_section)
        if abs(f) <= tol or hi - lo < 1e-15:
            break
        if (f < 0.0) == (f_lo < 0.0):
            lo = tau
            f_lo = f
        else:
            hi = tau
    return y, tau
