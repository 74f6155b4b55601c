"""Eigenstate projections onto the (N1, N3) population plane.

A grid is stored as an ``(N+1, N+1)`` array indexed ``[n1, n3]`` with zeros
outside the simplex ``n1 + n3 <= N``. The Husimi projection integrates the
coherent-state overlap over both relative phases; all cross terms between
different Fock states cancel, which leaves a multinomial smoothing of the Fock
projection. The quadrature route keeps the phase integral explicit and serves
as an independent check of that identity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import gammaln, xlogy

from .fock import FockBasis, log_multinomial
from .spectra import EigenSystem, select_near, select_window

# bound on (evaluation points x Fock states) held in memory at once
_CHUNK_ENTRIES = 1 << 22


@dataclass(frozen=True, eq=False)
class ProbabilityGrid:
    """Probability mass on the (n1, n3) lattice of an N-boson system.

    ``values[n1, n3]`` holds the mass of lattice point ``(n1, n3)``; entries with
    ``n1 + n3 > N`` are zero. ``meta`` records how the grid was made.
    """

    N: int
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.values.shape != (self.N + 1, self.N + 1):
            raise ValueError(f"grid for N={self.N} must have shape {(self.N + 1,) * 2}, got {self.values.shape}")

    def total(self) -> float:
        return float(self.values.sum())

    def at(self, n1: int, n3: int) -> float:
        return float(self.values[n1, n3])

    @property
    def mask(self) -> np.ndarray:
        """True on the simplex ``n1 + n3 <= N``."""
        i = np.arange(self.N + 1)
        return i[:, None] + i[None, :] <= self.N

    def points(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Lattice coordinates ``(n1/N, n3/N)`` and value of every simplex point, in basis order."""
        from .fock import build_basis

        b = build_basis(self.N)
        return b.n1 / self.N, b.n3 / self.N, self.values[b.n1, b.n3]


class CoherentSpec(NamedTuple):
    """Coherent state parameters: populations ``n1 = N1/N``, ``n3 = N3/N`` and phases in radians."""

    n1: float
    n3: float
    phi12: float = 0.0
    phi32: float = 0.0

    @property
    def n2(self) -> float:
        return 1.0 - self.n1 - self.n3

    def validate(self, tol: float = 1e-12) -> None:
        if self.n1 < 0 or self.n3 < 0 or self.n1 + self.n3 > 1 + tol:
            raise ValueError(f"coherent populations ({self.n1}, {self.n3}) lie outside the simplex")


def _to_grid(basis: FockBasis, values: np.ndarray) -> np.ndarray:
    g = np.zeros((basis.N + 1, basis.N + 1))
    g[basis.n1, basis.n3] = values
    return g


def _fock_probabilities(es: EigenSystem, k) -> np.ndarray:
    return np.abs(es.vector(k)) ** 2


def fock_projection(es: EigenSystem, k: int) -> ProbabilityGrid:
    """Squared eigenvector components of eigenstate ``k`` laid out on the lattice."""
    p = _fock_probabilities(es, k)
    return ProbabilityGrid(es.N, _to_grid(es.basis, p), {"kind": "fock", "index": int(k), "E/N": float(es.scaled_energies[k])})


def coherent_amplitudes(basis: FockBasis, spec: CoherentSpec) -> np.ndarray:
    """Fock-basis components sqrt(P(n)) exp(i n1 phi12 + i n3 phi32) of the projected coherent state."""
    spec.validate()
    p2 = max(spec.n2, 0.0)
    logp = log_multinomial(basis.n1, basis.n2, basis.n3, spec.n1, p2, spec.n3)
    phase = basis.n1 * spec.phi12 + basis.n3 * spec.phi32
    return np.exp(0.5 * logp + 1j * phase)


def coherent_overlap(es: EigenSystem, spec: CoherentSpec, k=None):
    """|<E_k|spec>|^2 for one eigenstate, a list of them, or all of them (``k=None``)."""
    amp = coherent_amplitudes(es.basis, spec)
    if es.vectors is None:
        raise ValueError("coherent overlaps need eigenvectors")
    V = es.vectors if k is None else es.vectors[:, k]
    return np.abs(np.conj(V).T @ amp) ** 2


# -- Husimi projection -------------------------------------------------------------

def _lattice_kernel(basis: FockBasis, x1: np.ndarray, x3: np.ndarray, x2: np.ndarray | None = None) -> np.ndarray:
    """Multinomial weights P(n; x1, 1-x1-x3, x3), rows = evaluation points, columns = Fock states."""
    if x2 is None:
        x2 = 1.0 - x1 - x3
        # a rounding residue on the simplex edge would turn exact zeros into tiny weights
        x2 = np.where(x2 < 4 * np.finfo(float).eps, 0.0, x2)
    n1, n2, n3 = (a.astype(float) for a in (basis.n1, basis.n2, basis.n3))
    lognorm = gammaln(basis.N + 1.0) - gammaln(n1 + 1) - gammaln(n2 + 1) - gammaln(n3 + 1)
    with np.errstate(divide="ignore"):
        L = lognorm + xlogy(n1, x1[:, None]) + xlogy(n2, x2[:, None]) + xlogy(n3, x3[:, None])
    return np.exp(L)


def husimi_smooth(basis: FockBasis, fock_values: np.ndarray, x1=None, x3=None) -> np.ndarray:
    """Multinomial smoothing of Fock-basis probabilities.

    ``fock_values`` has shape ``(D,)`` or ``(D, m)``. Evaluation points default to
    the lattice ``(n1/N, n3/N)`` in basis order; the result has one row per point.
    """
    h = np.asarray(fock_values, dtype=float)
    x2 = None
    if x1 is None:
        x1, x2, x3 = basis.n1 / basis.N, basis.n2 / basis.N, basis.n3 / basis.N
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x3 = np.atleast_1d(np.asarray(x3, dtype=float))
    out = np.empty((len(x1),) + h.shape[1:])
    step = max(1, _CHUNK_ENTRIES // basis.dim)
    for start in range(0, len(x1), step):
        sl = slice(start, start + step)
        out[sl] = _lattice_kernel(basis, x1[sl], x3[sl], None if x2 is None else x2[sl]) @ h
    return out


def husimi_projection_closed(es: EigenSystem, k: int) -> ProbabilityGrid:
    """Phase-integrated Husimi function of eigenstate ``k`` at every lattice point, in closed form."""
    h = husimi_smooth(es.basis, _fock_probabilities(es, k))
    return ProbabilityGrid(es.N, _to_grid(es.basis, h), {"kind": "husimi", "method": "closed", "index": int(k), "E/N": float(es.scaled_energies[k])})


def husimi_projection_quadrature(es: EigenSystem, k: int, phase_points: int | None = None, offset: float = 0.0) -> ProbabilityGrid:
    """Same quantity as :func:`husimi_projection_closed`, by trapezoid quadrature over both phases.

    The overlap amplitude is a trigonometric polynomial of degree N in each phase,
    so ``phase_points >= 2N + 2`` makes the rule exact; fewer points are allowed
    but flagged in ``meta["warning"]``.
    """
    N = es.N
    M = 2 * N + 2 if phase_points is None else int(phase_points)
    if M < 1:
        raise ValueError("phase_points must be positive")
    basis = es.basis
    c = es.vector(k)
    phi = offset + 2.0 * math.pi * np.arange(M) / M
    E = np.exp(1j * np.outer(phi, np.arange(N + 1)))  # [phase, n]
    x1, x3 = basis.n1 / N, basis.n3 / N
    K = _lattice_kernel(basis, x1, x3)
    values = np.empty(basis.dim)
    G = np.zeros((N + 1, N + 1), dtype=complex)
    for i in range(basis.dim):
        G[basis.n1, basis.n3] = c * np.sqrt(K[i])
        A = E @ G @ E.T  # [phi12, phi32]
        values[i] = np.mean(np.abs(A) ** 2)
    meta = {"kind": "husimi", "method": "quadrature", "index": int(k), "phase_points": M, "offset": float(offset), "E/N": float(es.scaled_energies[k])}
    if M < 2 * N + 2:
        meta["warning"] = f"phase_points={M} < 2N+2={2 * N + 2}; quadrature is not exact"
    return ProbabilityGrid(N, _to_grid(basis, values), meta)


# -- ensembles of eigenstates ---------------------------------------------------------

def microcanonical_average(
    es: EigenSystem,
    center: float,
    width: float | None = None,
    count: int | None = None,
    *,
    smoothed: bool = False,
) -> ProbabilityGrid:
    """Unweighted mean of Fock projections over eigenstates near ``center`` (E/N).

    Exactly one of ``width`` (keep |E/N - center| < width/2) or ``count`` (the
    ``count`` nearest levels) selects the states. ``smoothed=True`` returns the
    Husimi projection of the average instead.
    """
    if (width is None) == (count is None):
        raise ValueError("give exactly one of width or count")
    idx = select_window(es, center, width) if width is not None else select_near(es, center, count)
    if len(idx) == 0:
        raise ValueError(f"no eigenstate with |E/N - {center}| < {width}/2")
    if es.vectors is None:
        raise ValueError("microcanonical averages need eigenvectors")
    p = np.mean(np.abs(es.vectors[:, idx]) ** 2, axis=1)
    if smoothed:
        p = husimi_smooth(es.basis, p)
    e = es.scaled_energies[idx]
    meta = {
        "kind": "husimi" if smoothed else "fock",
        "method": "microcanonical",
        "center": float(center),
        "width": None if width is None else float(width),
        "count": int(len(idx)),
        "E/N_min": float(e.min()),
        "E/N_max": float(e.max()),
        "indices": [int(i) for i in idx],
    }
    grid = ProbabilityGrid(es.N, _to_grid(es.basis, p), meta)
    meta["sum"] = grid.total()
    return grid


def top_components(es: EigenSystem, indices: Sequence[int], per_state: int) -> np.ndarray:
    """Lattice points ``(n1/N, n3/N)`` of the ``per_state`` largest components of each listed eigenstate.

    Rows are grouped by eigenstate in the order given; inside a group they run
    from the largest component down, ties going to the earlier basis state.
    """
    if per_state < 1:
        raise ValueError("per_state must be >= 1")
    basis = es.basis
    per_state = min(per_state, basis.dim)
    rows = []
    for k in indices:
        p = _fock_probabilities(es, k)
        top = np.argsort(-p, kind="stable")[:per_state]
        rows.append(np.column_stack([basis.n1[top], basis.n3[top]]) / es.N)
    return np.concatenate(rows) if rows else np.empty((0, 2))


def raise_power(grid: ProbabilityGrid, gamma: float) -> ProbabilityGrid:
    """Pointwise ``values ** gamma`` for display contrast; the result is not normalised."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return ProbabilityGrid(grid.N, grid.values**gamma, {**grid.meta, "power": float(gamma)})
