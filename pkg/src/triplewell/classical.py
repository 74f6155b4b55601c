"""Classical limit: Hamiltonians in the six- and four-variable charts, the flow,
initial-condition solvers, the conserved Q and the critical points.

Scaled energy E/N is used throughout. Chart conventions:

* Cartesian ``(Q1, P1, Q2, P2, Q3, P3)`` with ``Q_k + i P_k = sqrt(2) rho_k exp(i phi_k)``
  and sum_k rho_k^2 = 1.
* Reduced ``(q1, p1, q3, p3)`` with ``q1 + i p1 = sqrt(2) rho_1 exp(i phi12)`` and
  ``q3 + i p3 = sqrt(2) rho_3 exp(i phi23)``, ``phi_jk = phi_j - phi_k``.
* Angles ``(n1, n3, phi12, phi32)`` with ``n_k = rho_k^2``; phases wrapped to (-pi, pi].

Going back to Cartesian fixes the unobservable overall phase by ``phi2 = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from . import _taylor
from .spectra import ModelParams

SQRT2 = math.sqrt(2.0)


class CartesianState(NamedTuple):
    Q1: float
    P1: float
    Q2: float
    P2: float
    Q3: float
    P3: float


class ReducedState(NamedTuple):
    q1: float
    p1: float
    q3: float
    p3: float


class AngleActionView(NamedTuple):
    n1: float
    n3: float
    phi12: float
    phi32: float


class IntegrationError(RuntimeError):
    def __init__(self, message: str, t: float):
        super().__init__(f"{message} at t={t:.6g}")
        self.t = t


def wrap_phase(phi):
    """Map angles to (-pi, pi]."""
    out = np.pi - np.mod(np.pi - np.asarray(phi, dtype=float), 2 * np.pi)
    return out if np.ndim(out) else float(out)


# -- energies ------------------------------------------------------------------

def energy_cartesian(s, params: ModelParams):
    y = np.asarray(s, dtype=float)
    Q1, P1, Q2, P2, Q3, P3 = np.moveaxis(y, -1, 0)
    S = Q1**2 + P1**2 - Q2**2 - P2**2 + Q3**2 + P3**2
    return (
        0.25 * params.U * S**2
        + 0.5 * params.epsilon * (Q3**2 + P3**2 - Q1**2 - P1**2)
        + params.J / SQRT2 * (Q1 * Q2 + P1 * P2 + Q2 * Q3 + P2 * P3)
    )


def _rho2_squared(s_sum, tol: float = 1e-12):
    r2 = 1.0 - 0.5 * s_sum
    if np.any(r2 < -tol):
        raise ValueError("state violates the population constraint (rho_2^2 < 0)")
    return np.maximum(r2, 0.0)


def energy_reduced(s, params: ModelParams):
    y = np.asarray(s, dtype=float)
    q1, p1, q3, p3 = np.moveaxis(y, -1, 0)
    ssum = q1**2 + p1**2 + q3**2 + p3**2
    rho2 = np.sqrt(_rho2_squared(ssum))
    return (
        params.U * (ssum - 1.0) ** 2
        + 0.5 * params.epsilon * (q3**2 + p3**2 - q1**2 - p1**2)
        + params.J * (q1 + q3) * rho2
    )


def energy_angles(view, params: ModelParams):
    """Energy from (n1, n3, phi12, phi32); vectorised over leading axes."""
    n1, n3, phi12, phi32 = np.moveaxis(np.asarray(view, dtype=float), -1, 0)
    n2 = _rho2_squared(2.0 * (n1 + n3))
    return (
        params.U * (2.0 * (n1 + n3) - 1.0) ** 2
        + params.epsilon * (n3 - n1)
        + SQRT2 * params.J * np.sqrt(n2) * (np.sqrt(n1) * np.cos(phi12) + np.sqrt(n3) * np.cos(phi32))
    )


# -- chart conversions ---------------------------------------------------------

def _complex_amplitudes(y):
    y = np.asarray(y, dtype=float)
    return (y[..., 0] + 1j * y[..., 1]), (y[..., 2] + 1j * y[..., 3]), (y[..., 4] + 1j * y[..., 5])


def _gauge(z2, tiny: float = 1e-300):
    mag = np.abs(z2)
    return np.where(mag > tiny, z2 / np.where(mag > tiny, mag, 1.0), 1.0)


def to_reduced(s) -> ReducedState | np.ndarray:
    z1, z2, z3 = _complex_amplitudes(s)
    w = _gauge(z2)
    a1 = z1 * np.conj(w)
    a3 = np.conj(z3) * w  # sqrt(2) rho_3 exp(i phi23)
    out = np.stack([a1.real, a1.imag, a3.real, a3.imag], axis=-1)
    return ReducedState(*map(float, out)) if out.ndim == 1 else out


def to_cartesian(s) -> CartesianState | np.ndarray:
    y = np.asarray(s, dtype=float)
    q1, p1, q3, p3 = np.moveaxis(y, -1, 0)
    rho2 = np.sqrt(_rho2_squared(q1**2 + p1**2 + q3**2 + p3**2))
    out = np.stack([q1, p1, SQRT2 * rho2, np.zeros_like(q1), q3, -p3], axis=-1)
    return CartesianState(*map(float, out)) if out.ndim == 1 else out


def to_angles(s) -> AngleActionView | np.ndarray:
    """Populations and relative phases of a Cartesian (6) or reduced (4) state."""
    y = np.asarray(s, dtype=float)
    if y.shape[-1] == 4:
        y = np.asarray(to_cartesian(y))
    z1, z2, z3 = _complex_amplitudes(y)
    w = _gauge(z2)
    n1 = 0.5 * np.abs(z1) ** 2
    n3 = 0.5 * np.abs(z3) ** 2
    phi12 = wrap_phase(np.angle(z1 * np.conj(w)))
    phi32 = wrap_phase(np.angle(z3 * np.conj(w)))
    out = np.stack(np.broadcast_arrays(n1, n3, phi12, phi32), axis=-1)
    return AngleActionView(*map(float, out)) if out.ndim == 1 else out


def from_angles(view) -> ReducedState | np.ndarray:
    n1, n3, phi12, phi32 = np.moveaxis(np.asarray(view, dtype=float), -1, 0)
    if np.any(n1 < 0) or np.any(n3 < 0) or np.any(n1 + n3 > 1.0 + 1e-12):
        raise ValueError("populations must satisfy n1, n3 >= 0 and n1 + n3 <= 1")
    r1 = np.sqrt(2.0 * n1)
    r3 = np.sqrt(2.0 * n3)
    out = np.stack([r1 * np.cos(phi12), r1 * np.sin(phi12), r3 * np.cos(phi32), -r3 * np.sin(phi32)], axis=-1)
    return ReducedState(*map(float, out)) if out.ndim == 1 else out


def cartesian_from_angles(view) -> CartesianState | np.ndarray:
    return to_cartesian(from_angles(view))


def populations(s) -> np.ndarray:
    """(n1, n2, n3) of Cartesian states along the last axis."""
    y = np.asarray(s, dtype=float)
    return 0.5 * np.stack([y[..., 0] ** 2 + y[..., 1] ** 2, y[..., 2] ** 2 + y[..., 3] ** 2, y[..., 4] ** 2 + y[..., 5] ** 2], -1)


def norm(s):
    """Total population 1/2 sum_k (Q_k^2 + P_k^2); equals 1 on the physical manifold."""
    y = np.asarray(s, dtype=float)
    return 0.5 * np.sum(y**2, axis=-1)


def rotate(s, theta: float):
    """Common phase rotation phi_k -> phi_k + theta applied to every well."""
    y = np.asarray(s, dtype=float)
    Q, P = y[..., 0::2], y[..., 1::2]
    c, sn = math.cos(theta), math.sin(theta)
    out = np.empty_like(y)
    out[..., 0::2] = Q * c - P * sn
    out[..., 1::2] = P * c + Q * sn
    return out


def classical_Q(s):
    """rho1^2 + rho3^2 - 2 rho1 rho3 cos(phi32 - phi12), written as |z1 - z3|^2 / 2."""
    y = np.asarray(s, dtype=float)
    return 0.5 * ((y[..., 0] - y[..., 4]) ** 2 + (y[..., 1] - y[..., 5]) ** 2)


# -- dynamics ------------------------------------------------------------------------

def hamilton_rhs(s, params: ModelParams) -> np.ndarray:
    """(dQ_k/dt, dP_k/dt) = (dH/dP_k, -dH/dQ_k) in the Cartesian chart."""
    y = np.asarray(s, dtype=float)
    Q1, P1, Q2, P2, Q3, P3 = np.moveaxis(y, -1, 0)
    U, eps, c = params.U, params.epsilon, params.J / SQRT2
    S = Q1**2 + P1**2 - Q2**2 - P2**2 + Q3**2 + P3**2
    a1 = U * S - eps
    a2 = -U * S
    a3 = U * S + eps
    return np.stack(
        [
            a1 * P1 + c * P2,
            -(a1 * Q1 + c * Q2),
            a2 * P2 + c * (P1 + P3),
            -(a2 * Q2 + c * (Q1 + Q3)),
            a3 * P3 + c * P2,
            -(a3 * Q3 + c * Q2),
        ],
        axis=-1,
    )


def cartesian_hessian(s, params: ModelParams) -> np.ndarray:
    y = np.asarray(s, dtype=float)
    sig = np.array([1.0, 1.0, -1.0, -1.0, 1.0, 1.0])
    tilt = np.array([-1.0, -1.0, 0.0, 0.0, 1.0, 1.0]) * params.epsilon
    S = float(np.sum(sig * y**2))
    H = 2.0 * params.U * np.outer(sig * y, sig * y) + np.diag(params.U * S * sig + tilt)
    c = params.J / SQRT2
    for a, b in ((0, 2), (1, 3), (2, 4), (3, 5)):
        H[a, b] += c
        H[b, a] += c
    return H


def flow_jacobian(s, params: ModelParams, *, corotating: bool = False) -> np.ndarray:
    """Jacobian of :func:`hamilton_rhs` at ``s``.

    With ``corotating`` the flow is linearised in the frame turning with the
    overall phase, i.e. for H - lam * norm with lam fixed by grad H = lam * y.
    That is the frame in which a relative equilibrium is a true fixed point.
    """
    y = np.asarray(s, dtype=float)
    omega = np.kron(np.eye(3), np.array([[0.0, 1.0], [-1.0, 0.0]]))
    hess = cartesian_hessian(y, params)
    if corotating:
        grad = -omega @ hamilton_rhs(y, params)
        lam = float(grad @ y) / float(y @ y)
        hess = hess - lam * np.eye(6)
    return omega @ hess


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Cartesian samples at uniform times with a conserved-quantity audit."""

    t: np.ndarray
    states: np.ndarray
    params: ModelParams
    energy_drift: float
    norm_drift: float
    q_drift: float | None
    steps: int = 0
    integrator: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def sample_dt(self) -> float:
        return float(self.t[1] - self.t[0]) if len(self.t) > 1 else 0.0

    def energies(self) -> np.ndarray:
        return energy_cartesian(self.states, self.params)

    def populations(self) -> np.ndarray:
        return populations(self.states)

    def angles(self) -> np.ndarray:
        return to_angles(self.states)


def _audit(states: np.ndarray, params: ModelParams):
    E = energy_cartesian(states, params)
    scale = abs(E[0]) if E[0] != 0 else 1.0
    e_drift = float(np.max(np.abs(E - E[0])) / scale)
    n_drift = float(np.max(np.abs(norm(states) - norm(states[0]))))
    q_drift = None
    if params.epsilon == 0:
        Qc = classical_Q(states)
        q_drift = float(np.max(np.abs(Qc - Qc[0])))
    return e_drift, n_drift, q_drift


def integrate(
    s0,
    params: ModelParams,
    t_final: float,
    sample_dt: float = 0.01,
    *,
    atol: float = 1e-12,
    rtol: float = 1e-12,
    order: int = 25,
    method: str = "taylor",
    rotate_by: float = 0.0,
    bits: int = 128,
) -> Trajectory:
    """Integrate Hamilton's equations from the Cartesian state ``s0``.

    ``method="taylor"`` (default) is the adaptive Taylor-series scheme;
    ``method="dop853"`` runs SciPy's 8th-order Runge-Kutta as a cross-check;
    ``method="taylor-mp"`` is the Taylor scheme in ``bits``-bit MPFR arithmetic
    (tolerances and order are then set from ``bits``), for chaotic runs that must
    be reproducible beyond float64 rounding. ``rotate_by`` applies a common phase
    rotation to ``s0`` first, in the working precision of the method.
    """
    y0 = np.asarray(s0, dtype=float).copy()
    if y0.shape != (6,):
        raise ValueError("initial state must have six Cartesian components")
    if abs(norm(y0) - 1.0) > 1e-10:
        raise ValueError(f"initial state violates the norm constraint (norm={norm(y0):.12g})")
    if t_final < 0 or (t_final > 0 and sample_dt <= 0):
        raise ValueError("need t_final >= 0 and sample_dt > 0")
    if method != "taylor-mp" and rotate_by:
        y0 = rotate(y0, rotate_by)
    if t_final == 0:
        states = (rotate(y0, rotate_by) if method == "taylor-mp" else y0)[None, :]
        return Trajectory(np.zeros(1), states, params, 0.0, 0.0, 0.0 if params.epsilon == 0 else None)

    if method == "taylor":
        states, steps, status, t_end = _taylor.run(
            y0, params.U, params.J, params.epsilon, float(t_final), float(sample_dt), int(order), atol, rtol, 1e-10
        )
        if status == 1:
            raise IntegrationError("non-finite state", t_end)
        if status == 2:
            raise IntegrationError("step size underflow (tolerance cannot be met)", t_end)
    elif method == "dop853":
        n = int(math.floor(t_final / sample_dt + 1e-9)) + 1
        t_eval = np.arange(n) * sample_dt
        sol = solve_ivp(
            lambda t, y: hamilton_rhs(y, params),
            (0.0, t_eval[-1]),
            y0,
            method="DOP853",
            t_eval=t_eval,
            atol=atol,
            rtol=rtol,
        )
        if not sol.success:
            raise IntegrationError(sol.message, float(sol.t[-1]) if len(sol.t) else 0.0)
        states, steps = sol.y.T.copy(), int(sol.nfev)
    elif method == "taylor-mp":
        from . import _taylor_mp

        states, steps = _taylor_mp.run(
            y0, params.U, params.J, params.epsilon, float(t_final), float(sample_dt), bits=bits, theta=rotate_by
        )
    else:
        raise ValueError(f"unknown integration method {method!r}")

    t = np.arange(len(states)) * float(sample_dt)
    e_drift, n_drift, q_drift = _audit(states, params)
    meta = dict(method=method, atol=atol, rtol=rtol, order=order if method == "taylor" else 8)
    if method == "taylor-mp":
        meta.update(atol=2.0 ** (16 - bits), rtol=0.0, order=30, bits=bits)
    return Trajectory(t, states, params, e_drift, n_drift, q_drift, int(steps), meta)


def advance(s0, params: ModelParams, dt: float, *, atol: float = 1e-12, rtol: float = 1e-12, order: int = 25) -> np.ndarray:
    """Cartesian state after exactly ``dt`` (used to refine section crossings)."""
    y0 = np.asarray(s0, dtype=float).copy()
    if dt <= 0:
        return y0
    return _taylor.flow(y0, params.U, params.J, params.epsilon, float(dt), int(order), atol, rtol)


# -- initial-condition solvers -------------------------------------------------------

class Rho2ZeroLocus(NamedTuple):
    """The unique (n1, n3) with n2 = 0 at a given energy; any phases lie on the same energy shell."""

    n1: float
    n3: float

    def at(self, phi12: float = 0.0, phi32: float = 0.0) -> AngleActionView:
        return AngleActionView(self.n1, self.n3, float(wrap_phase(phi12)), float(wrap_phase(phi32)))


def solve_rho2_zero(params: ModelParams, E: float) -> Rho2ZeroLocus:
    """Populations on the n2 = 0 manifold with energy E: n3 - n1 = (E - U)/epsilon, n1 + n3 = 1."""
    if params.epsilon == 0:
        if abs(E - params.U) > 1e-12:
            raise ValueError("with epsilon = 0 the n2 = 0 manifold only has energy E = U")
        raise ValueError("with epsilon = 0 and E = U every pair with n1 + n3 = 1 qualifies; no unique solution")
    d = (E - params.U) / params.epsilon
    if abs(d) > 1.0:
        raise ValueError(f"energy {E} is not reachable on the n2 = 0 manifold (|E - U| > |epsilon|)")
    return Rho2ZeroLocus(0.5 * (1.0 - d), 0.5 * (1.0 + d))


def solve_on_section(
    params: ModelParams,
    E: float,
    n1: float,
    phi12: float,
    phi32: float,
    *,
    grid: int = 512,
    xtol: float = 1e-14,
) -> list[AngleActionView]:
    """All n3 in [0, 1 - n1] giving energy E for fixed (n1, phi12, phi32).

    Roots are bracketed by sign changes on a uniform grid and refined with
    Brent's method; an empty list means the line misses the energy shell.
    """
    if not 0.0 <= n1 <= 1.0:
        raise ValueError("n1 must lie in [0, 1]")
    top = 1.0 - n1
    n3 = np.linspace(0.0, top, grid)
    views = np.stack(np.broadcast_arrays(n1, n3, phi12, phi32), axis=-1)
    f = energy_angles(views, params) - E

    def g(x):
        return float(energy_angles((n1, min(max(x, 0.0), top), phi12, phi32), params)) - E

    roots = []
    for i in range(grid - 1):
        if f[i] == 0.0:
            roots.append(n3[i])
        elif f[i] * f[i + 1] < 0.0:
            roots.append(brentq(g, n3[i], n3[i + 1], xtol=xtol, rtol=4 * np.finfo(float).eps))
    if f[-1] == 0.0:
        roots.append(n3[-1])
    return [AngleActionView(float(n1), float(r), float(wrap_phase(phi12)), float(wrap_phase(phi32))) for r in roots]


# -- critical points --------------------------------------------------------------------

@dataclass(frozen=True)
class CriticalPoint:
    state: AngleActionView
    reduced: ReducedState
    energy: float
    stability: str  # "stable" (definite Hessian), "unstable" (hyperbolic flow) or "saddle"
    hessian_eigenvalues: tuple
    flow_growth_rate: float  # largest real part of the linearised Cartesian flow
    gradient_norm: float

    def as_record(self) -> dict:
        return dict(
            n1=self.state.n1,
            n3=self.state.n3,
            phi12=self.state.phi12,
            phi32=self.state.phi32,
            energy=self.energy,
            stability=self.stability,
            hessian_eigenvalues=list(self.hessian_eigenvalues),
            flow_growth_rate=self.flow_growth_rate,
            gradient_norm=self.gradient_norm,
        )


def reduced_gradient(x, params: ModelParams) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    s = float(np.sum(x**2))
    r = math.sqrt(max(1.0 - 0.5 * s, 0.0))
    sig = np.array([-1.0, -1.0, 1.0, 1.0])
    hop = np.array([1.0, 0.0, 1.0, 0.0])
    qsum = x[0] + x[2]
    return 4.0 * params.U * (s - 1.0) * x + params.epsilon * sig * x + params.J * hop * r - params.J * qsum * x / (2.0 * r)


def reduced_hessian(x, params: ModelParams) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    s = float(np.sum(x**2))
    r = math.sqrt(max(1.0 - 0.5 * s, 0.0))
    sig = np.array([-1.0, -1.0, 1.0, 1.0])
    hop = np.array([1.0, 0.0, 1.0, 0.0])
    qsum = x[0] + x[2]
    H = 8.0 * params.U * np.outer(x, x) + np.diag(4.0 * params.U * (s - 1.0) + params.epsilon * sig)
    H -= params.J * (np.outer(hop, x) + np.outer(x, hop)) / (2.0 * r)
    H -= params.J * qsum * (np.eye(4) / (2.0 * r) + np.outer(x, x) / (4.0 * r**3))
    return H


def _newton(x0, params: ModelParams, max_iter: int = 100, tol: float = 1e-13):
    x = np.array(x0, dtype=float)
    for _ in range(max_iter):
        g = reduced_gradient(x, params)
        if np.linalg.norm(g) <= tol:
            return x, "ok"
        Hm = reduced_hessian(x, params)
        try:
            dx = np.linalg.solve(Hm, -g)
        except np.linalg.LinAlgError:
            return x, "singular"
        if not np.all(np.isfinite(dx)):
            return x, "singular"
        step = 1.0
        while np.sum((x + step * dx) ** 2) >= 2.0 and step > 1e-6:
            step *= 0.5
        if np.sum((x + step * dx) ** 2) >= 2.0:
            return x, "diverged"
        x = x + step * dx
    g = reduced_gradient(x, params)
    return x, ("ok" if np.linalg.norm(g) <= 1e-10 else "diverged")


class CriticalSearch(NamedTuple):
    points: list
    singular: int
    dropped: int


def find_critical_points(params: ModelParams, seeds: int = 8, *, dedupe: float = 1e-6, report: bool = False):
    """Equilibria of the reduced Hamiltonian found by Newton iteration from a seed grid.

    Seeds take ``seeds`` values per population on the open simplex and phases in
    {0, pi}. Points with gradient norm above 1e-10 are dropped; with
    ``report=True`` a :class:`CriticalSearch` with the drop counters is returned.
    """
    vals = (np.arange(seeds) + 0.5) / seeds
    found: list[np.ndarray] = []
    singular = dropped = 0
    for a in vals:
        for b in vals:
            if a + b >= 1.0:
                continue
            for phi12 in (0.0, math.pi):
                for phi32 in (0.0, math.pi):
                    x0 = np.asarray(from_angles((a, b, phi12, phi32)))
                    x, status = _newton(x0, params)
                    if status == "singular":
                        singular += 1
                        continue
                    if status != "ok" or np.linalg.norm(reduced_gradient(x, params)) > 1e-10:
                        dropped += 1
                        continue
                    if all(np.linalg.norm(x - y) >= dedupe for y in found):
                        found.append(x)
    points = [_classify(x, params) for x in found]
    points.sort(key=lambda p: p.energy)
    return CriticalSearch(points, singular, dropped) if report else points


def _classify(x: np.ndarray, params: ModelParams) -> CriticalPoint:
    hess = np.linalg.eigvalsh(reduced_hessian(x, params))
    growth = float(np.max(np.linalg.eigvals(flow_jacobian(to_cartesian(x), params, corotating=True)).real))
    if np.all(hess > 0) or np.all(hess < 0):
        stability = "stable"
    elif growth > 1e-5:
        stability = "unstable"
    else:
        stability = "saddle"
    view = to_angles(x)
    return CriticalPoint(
        state=view,
        reduced=ReducedState(*map(float, x)),
        energy=float(energy_reduced(x, params)),
        stability=stability,
        hessian_eigenvalues=tuple(float(h) for h in hess),
        flow_growth_rate=growth,
        gradient_norm=float(np.linalg.norm(reduced_gradient(x, params))),
    )
