"""Fixed-N Fock basis of the three-mode system and multinomial weights.

States are ordered with ``n1`` descending and, inside each ``n1`` block,
``n2`` descending (``n3`` ascending). For N=2 this gives::

    (2,0,0) (1,1,0) (1,0,1) (0,2,0) (0,1,1) (0,0,2)

so the flat index of ``(n1, n2, n3)`` is ``a*(a+1)/2 + n3`` with ``a = N - n1``.
Every matrix, grid and cache file in the package depends on this ordering.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln, xlogy


class FockState(NamedTuple):
    n1: int
    n2: int
    n3: int

    @property
    def total(self) -> int:
        return self.n1 + self.n2 + self.n3


def dimension(N: int) -> int:
    """Number of occupation triples with n1+n2+n3 = N, i.e. (N+2)!/(2! N!)."""
    return (N + 1) * (N + 2) // 2


@dataclass(frozen=True)
class FockBasis:
    """Immutable enumeration of the occupation triples for ``total_particles`` bosons.

    ``n1``, ``n2``, ``n3`` are integer arrays in basis order; ``states`` gives the
    same information as a tuple of :class:`FockState`.
    """

    total_particles: int
    n1: np.ndarray = field(repr=False)
    n2: np.ndarray = field(repr=False)
    n3: np.ndarray = field(repr=False)

    @property
    def N(self) -> int:
        return self.total_particles

    @property
    def dim(self) -> int:
        return len(self.n1)

    def __len__(self) -> int:
        return len(self.n1)

    @property
    def states(self) -> tuple[FockState, ...]:
        return tuple(FockState(int(a), int(b), int(c)) for a, b, c in zip(self.n1, self.n2, self.n3))

    def state(self, i: int) -> FockState:
        return FockState(int(self.n1[i]), int(self.n2[i]), int(self.n3[i]))

    def index(self, state) -> int:
        n1, n2, n3 = (int(x) for x in state)
        if min(n1, n2, n3) < 0 or n1 + n2 + n3 != self.N:
            raise KeyError(f"{tuple(state)} is not a state of the N={self.N} basis")
        a = self.N - n1
        return a * (a + 1) // 2 + n3

    def indices(self, n1, n3) -> np.ndarray:
        """Vectorised :meth:`index` from ``(n1, n3)`` arrays (no range checks)."""
        a = self.N - np.asarray(n1, dtype=np.int64)
        return a * (a + 1) // 2 + np.asarray(n3, dtype=np.int64)

    def swap_permutation(self) -> np.ndarray:
        """Permutation ``p`` with ``states[p[i]]`` equal to ``states[i]`` with wells 1 and 3 exchanged."""
        return self.indices(self.n3, self.n1)


def build_basis(N: int) -> FockBasis:
    if int(N) != N or N < 1:
        raise ValueError(f"boson number must be a positive integer, got {N!r}")
    N = int(N)
    n1 = np.repeat(np.arange(N, -1, -1), np.arange(1, N + 2))
    n3 = np.concatenate([np.arange(N - a + 1) for a in range(N, -1, -1)])
    n1, n3 = n1.astype(np.int64), n3.astype(np.int64)
    n2 = N - n1 - n3
    for arr in (n1, n2, n3):
        arr.setflags(write=False)
    return FockBasis(N, n1, n2, n3)


def _check_probabilities(p1, p2, p3) -> None:
    p = np.stack(np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (p1, p2, p3))))
    if np.any(p < 0):
        raise ValueError("multinomial probabilities must be non-negative")
    if np.any(np.abs(p.sum(axis=0) - 1.0) > 1e-12):
        raise ValueError("multinomial probabilities must sum to 1 (tolerance 1e-12)")


def log_multinomial(n1, n2, n3, p1, p2, p3) -> np.ndarray:
    """Natural log of N!/(n1! n2! n3!) p1^n1 p2^n2 p3^n3, broadcasting over all inputs.

    Uses 0*log(0) = 0, so impossible outcomes come out as ``-inf`` and never NaN.
    """
    n1, n2, n3 = (np.asarray(x, dtype=float) for x in (n1, n2, n3))
    p1, p2, p3 = (np.asarray(x, dtype=float) for x in (p1, p2, p3))
    lognorm = gammaln(n1 + n2 + n3 + 1) - gammaln(n1 + 1) - gammaln(n2 + 1) - gammaln(n3 + 1)
    with np.errstate(divide="ignore"):
        return lognorm + xlogy(n1, p1) + xlogy(n2, p2) + xlogy(n3, p3)


def multinomial_weight(state, p1: float, p2: float, p3: float) -> float:
    """Multinomial probability of the occupation triple ``state`` under (p1, p2, p3).

    Raises ``ValueError`` for negative or non-normalised probabilities.
    """
    _check_probabilities(p1, p2, p3)
    n1, n2, n3 = state
    if min(n1, n2, n3) < 0:
        raise ValueError(f"occupation numbers must be non-negative, got {tuple(state)}")
    return float(np.exp(log_multinomial(n1, n2, n3, p1, p2, p3)))


def multinomial_weights(basis: FockBasis, p1, p2, p3) -> np.ndarray:
    """Multinomial weights of every basis state.

    Scalars give shape ``(D,)``; arrays of probabilities of shape ``S`` give ``S + (D,)``.
    """
    _check_probabilities(p1, p2, p3)
    p1, p2, p3 = (np.asarray(x, dtype=float)[..., None] for x in (p1, p2, p3))
    return np.exp(log_multinomial(basis.n1, basis.n2, basis.n3, p1, p2, p3))
