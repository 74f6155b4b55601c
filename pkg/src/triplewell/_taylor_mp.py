"""Extended-precision twin of the Taylor integrator, using MPFR numbers.

Same recurrences and step rule as the double-precision version, carried out in
numpy object arrays of ``gmpy2.mpfr``. It is slow (seconds per unit time) and
meant for short chaotic runs where float64 rounding differences would grow
to order one before the end of the run.
"""
from __future__ import annotations

import math

import gmpy2
import numpy as np


def _mp_array(values) -> np.ndarray:
    return np.array([gmpy2.mpfr(float(v)) for v in values], dtype=object)


def coefficients(y: np.ndarray, U, J, eps, order: int) -> np.ndarray:
    """Taylor coefficients ``x[i, n]`` of the flow through ``y`` (all mpfr)."""
    zero = y[0] * 0
    x = np.full((6, order + 1), zero, dtype=object)
    S = np.full(order + 1, zero, dtype=object)
    c = J / gmpy2.sqrt(gmpy2.mpfr(2))
    x[:, 0] = y
    sig = (1, -1, 1)
    tilt = (-eps, zero, eps)
    for n in range(order):
        s = zero
        for k in range(3):
            q, p = x[2 * k, : n + 1], x[2 * k + 1, : n + 1]
            acc = np.dot(q, q[::-1]) + np.dot(p, p[::-1])
            s = s + acc if sig[k] > 0 else s - acc
        S[n] = s
        Srev = S[n::-1]
        for k in range(3):
            qk, pk = 2 * k, 2 * k + 1
            w = U * sig[k] * Srev
            aq = tilt[k] * x[pk, n] + np.dot(w, x[pk, : n + 1])
            ap = tilt[k] * x[qk, n] + np.dot(w, x[qk, : n + 1])
            if k == 1:
                nq, npp = x[0, n] + x[4, n], x[1, n] + x[5, n]
            else:
                nq, npp = x[2, n], x[3, n]
            x[qk, n + 1] = (aq + c * npp) / (n + 1)
            x[pk, n + 1] = -(ap + c * nq) / (n + 1)
    return x


def step_size(x: np.ndarray, order: int, tol) -> float:
    a = max(abs(v) for v in x[:, order - 1])
    b = max(abs(v) for v in x[:, order])
    h = math.inf
    if a > 0:
        h = min(h, float((tol / a) ** (gmpy2.mpfr(1) / (order - 1))))
    if b > 0:
        h = min(h, float((tol / b) ** (gmpy2.mpfr(1) / order)))
    return h


def evaluate(x: np.ndarray, h) -> np.ndarray:
    order = x.shape[1] - 1
    v = x[:, order].copy()
    for n in range(order - 1, -1, -1):
        v = v * h + x[:, n]
    return v


def rotate(y: np.ndarray, theta) -> np.ndarray:
    c, s = gmpy2.cos(theta), gmpy2.sin(theta)
    out = y.copy()
    out[0::2] = y[0::2] * c - y[1::2] * s
    out[1::2] = y[1::2] * c + y[0::2] * s
    return out


def run(y0, U: float, J: float, eps: float, t_final: float, sample_dt: float, *, bits: int = 160, order: int = 30, theta: float = 0.0):
    """Integrate from float64 ``y0`` (taken as exact) rotated by the common phase ``theta``.

    Sample times are exact multiples of ``sample_dt``; states are returned rounded
    to float64 with the number of steps taken.
    """
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        y = _mp_array(y0)
        if theta:
            y = rotate(y, gmpy2.mpfr(theta))
        U_, J_, e_ = gmpy2.mpfr(U), gmpy2.mpfr(J), gmpy2.mpfr(eps)
        tol = gmpy2.mpfr(2) ** (-(bits - 16))
        dt = gmpy2.mpfr(sample_dt)
        n_samples = int(math.floor(t_final / sample_dt + 1e-9)) + 1
        out = np.empty((n_samples, 6))
        out[0] = [float(v) for v in y]
        t = gmpy2.mpfr(0)
        k, steps = 1, 0
        while k < n_samples:
            x = coefficients(y, U_, J_, e_, order)
            h = step_size(x, order, tol)
            h = gmpy2.mpfr(t_final) - t + dt if h == math.inf else gmpy2.mpfr(h)
            while k < n_samples and k * dt <= t + h:
                out[k] = [float(v) for v in evaluate(x, k * dt - t)]
                k += 1
            y = evaluate(x, h)
            t += h
            steps += 1
    return out, steps
