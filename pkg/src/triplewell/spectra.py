"""Quantum Hamiltonian, the conserved operator Q, diagonalisation and eigenstate statistics."""
from __future__ import annotations

import hashlib
import logging
import math
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .fock import FockBasis, build_basis

log = logging.getLogger(__name__)

CACHE_MAGIC = b"TW3W"
CACHE_VERSION = 1
_HEADER = struct.Struct("<4sIq3dqqqq")  # magic, version, N, U, J, eps, D, K, first_index, has_vectors


class EigensolverError(RuntimeError):
    """Raised when LAPACK fails to diagonalise a matrix."""


@dataclass(frozen=True)
class ModelParams:
    U: float = 0.7
    J: float = 1.0
    epsilon: float = 1.5
    N: int = 120

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        for name in ("U", "J", "epsilon"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, value)

    def replace(self, **changes) -> "ModelParams":
        fields = dict(U=self.U, J=self.J, epsilon=self.epsilon, N=self.N)
        fields.update(changes)
        return ModelParams(**fields)


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Eigenpairs of the Hamiltonian in Fock-basis order.

    ``energies`` are ascending. ``vectors[:, j]`` is the eigenvector of
    ``energies[j]`` (``None`` when only eigenvalues were requested). A system
    restricted to part of the spectrum has ``first_index`` equal to the global
    position of its lowest level, or ``None`` when that position is unknown.
    """

    params: ModelParams
    basis: FockBasis
    energies: np.ndarray
    vectors: np.ndarray | None = None
    first_index: int | None = 0

    def __post_init__(self):
        if self.vectors is not None and self.vectors.shape != (self.basis.dim, len(self.energies)):
            raise ValueError("eigenvector matrix shape does not match basis and energies")

    @property
    def N(self) -> int:
        return self.params.N

    @property
    def scaled_energies(self) -> np.ndarray:
        return self.energies / self.params.N

    @property
    def is_complete(self) -> bool:
        return len(self.energies) == self.basis.dim

    def __len__(self) -> int:
        return len(self.energies)

    def vector(self, k: int) -> np.ndarray:
        if self.vectors is None:
            raise ValueError("this eigen-system holds eigenvalues only")
        if not 0 <= k < len(self.energies):
            raise IndexError(f"eigenstate index {k} outside 0..{len(self.energies) - 1}")
        return self.vectors[:, k]


# -- matrices -----------------------------------------------------------------

def _check_match(params: ModelParams, basis: FockBasis) -> None:
    if basis.total_particles != params.N:
        raise ValueError(f"basis has N={basis.total_particles} but params have N={params.N}")


def hopping_pairs(basis: FockBasis):
    """Index pairs (i, j) and amplitudes sqrt((n_a+1) n_b) for single hops 2->1 and 2->3.

    Returned as two triples ``(src, dst, amp)``; the pairs between wells 1 and 3
    are never generated.
    """
    n1, n2, n3 = basis.n1, basis.n2, basis.n3
    src = np.flatnonzero(n2 > 0)
    to1 = basis.indices(n1[src] + 1, n3[src])
    amp1 = np.sqrt((n1[src] + 1.0) * n2[src])
    to3 = basis.indices(n1[src], n3[src] + 1)
    amp3 = np.sqrt((n3[src] + 1.0) * n2[src])
    return (src, to1, amp1), (src, to3, amp3)


def hamiltonian_diagonal(params: ModelParams, basis: FockBasis) -> np.ndarray:
    n1, n2, n3 = basis.n1, basis.n2, basis.n3
    return params.U / params.N * (n1 - n2 + n3) ** 2.0 + params.epsilon * (n3 - n1)


def build_hamiltonian(params: ModelParams, basis: FockBasis | None = None) -> np.ndarray:
    """Dense, exactly symmetric Hamiltonian matrix (Fortran order, ready for LAPACK)."""
    basis = build_basis(params.N) if basis is None else basis
    _check_match(params, basis)
    D = basis.dim
    H = np.zeros((D, D), order="F")
    H[np.arange(D), np.arange(D)] = hamiltonian_diagonal(params, basis)
    c = params.J / math.sqrt(2.0)
    for src, dst, amp in hopping_pairs(basis):
        H[src, dst] = c * amp
        H[dst, src] = c * amp
    return H


def build_Q(basis: FockBasis) -> np.ndarray:
    """Matrix of (N1 + N3) - (a1^dag a3 + a3^dag a1)."""
    n1, n3 = basis.n1, basis.n3
    D = basis.dim
    Q = np.zeros((D, D), order="F")
    Q[np.arange(D), np.arange(D)] = n1 + n3
    src = np.flatnonzero(n3 > 0)
    dst = basis.indices(n1[src] + 1, n3[src] - 1)
    amp = -np.sqrt((n1[src] + 1.0) * n3[src])
    Q[src, dst] = amp
    Q[dst, src] = amp
    return Q


def commutator_norm(A: np.ndarray, B: np.ndarray) -> float:
    """Max-entry norm of AB - BA."""
    return float(np.max(np.abs(A @ B - B @ A)))


# -- diagonalisation -----------------------------------------------------------

def _asymmetry(H: np.ndarray, block: int = 2048) -> float:
    """Largest |H - H^T| entry, scanned in row blocks; NaN if any entry is not finite."""
    worst = 0.0
    for start in range(0, H.shape[0], block):
        stop = min(start + block, H.shape[0])
        rows = H[start:stop, :]
        if not np.isfinite(rows).all():
            return math.nan
        worst = max(worst, float(np.max(np.abs(rows - H[:, start:stop].T))))
    return worst


def diagonalize(
    H: np.ndarray,
    basis: FockBasis,
    params: ModelParams,
    *,
    energy_window: tuple[float, float] | None = None,
    index_range: tuple[int, int] | None = None,
    eigvals_only: bool = False,
    overwrite: bool = False,
) -> EigenSystem:
    """Dense symmetric eigensolve.

    ``energy_window=(lo, hi)`` in scaled units E/N keeps levels with lo < E/N <= hi;
    ``index_range=(i, j)`` keeps global levels i..j inclusive. With ``overwrite``
    the input matrix is destroyed, which avoids one D x D copy.
    """
    _check_match(params, basis)
    if H.ndim != 2 or H.shape != (basis.dim, basis.dim):
        raise ValueError(f"matrix shape {H.shape} does not match basis dimension {basis.dim}")
    if energy_window is not None and index_range is not None:
        raise ValueError("give at most one of energy_window and index_range")
    scale = max(1.0, float(np.max(np.abs(np.diagonal(H)))))
    asym = _asymmetry(H)
    if math.isnan(asym):
        # LAPACK can loop indefinitely on non-finite input
        raise EigensolverError(f"Hamiltonian matrix for D={basis.dim} has non-finite entries")
    if asym > 1e-12 * scale:
        raise ValueError("Hamiltonian matrix is not symmetric")

    kwargs = {}
    first_index: int | None = 0
    if energy_window is not None:
        lo, hi = energy_window
        kwargs = dict(subset_by_value=(lo * params.N, hi * params.N), driver="evr")
        first_index = None
    elif index_range is not None:
        kwargs = dict(subset_by_index=tuple(index_range), driver="evr")
        first_index = int(index_range[0])
    if H.flags.c_contiguous and not H.flags.f_contiguous:
        # H is symmetric, so its transpose is the same matrix in the Fortran order LAPACK wants
        H = H.T
    try:
        out = scipy.linalg.eigh(
            H, lower=True, eigvals_only=eigvals_only, overwrite_a=overwrite, check_finite=False, **kwargs
        )
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolverError(f"eigensolver failed for D={basis.dim}: {exc}") from exc
    energies, vectors = (out, None) if eigvals_only else out
    return EigenSystem(params, basis, np.ascontiguousarray(energies), vectors, first_index)


def solve(params: ModelParams, **kwargs) -> EigenSystem:
    """Build basis and Hamiltonian for ``params`` and diagonalise (keywords as in :func:`diagonalize`)."""
    basis = build_basis(params.N)
    H = build_hamiltonian(params, basis)
    return diagonalize(H, basis, params, overwrite=True, **kwargs)


# -- conserved quantity ---------------------------------------------------------

def degenerate_groups(energies: np.ndarray, rel_tol: float = 1e-9) -> list[np.ndarray]:
    """Split ascending energies into runs whose neighbours differ by < rel_tol * max|E|."""
    tol = rel_tol * max(float(np.max(np.abs(energies))), 1e-300)
    breaks = np.flatnonzero(np.diff(energies) >= tol) + 1
    return np.split(np.arange(len(energies)), breaks)


def q_labels(es: EigenSystem, *, return_vectors: bool = False):
    """Eigenvalue of Q/N carried by each eigenstate in the integrable case.

    Inside each degenerate energy group Q is diagonalised so that every label is
    sharp; with ``return_vectors`` the correspondingly rotated eigenvectors are
    returned too (label ``j`` belongs to column ``j``).
    """
    if es.params.epsilon != 0:
        raise ValueError("q labels are only defined for epsilon = 0")
    if es.vectors is None:
        raise ValueError("q labels need eigenvectors")
    Q = build_Q(es.basis)
    labels = np.empty(len(es.energies))
    rotated = np.array(es.vectors, copy=True) if return_vectors else None
    for group in degenerate_groups(es.energies):
        V = es.vectors[:, group]
        block = V.T @ (Q @ V)
        if len(group) == 1:
            labels[group] = block[0, 0]
            continue
        qv, R = np.linalg.eigh(0.5 * (block + block.T))
        labels[group] = qv
        if rotated is not None:
            rotated[:, group] = V @ R
    labels /= es.params.N
    return (labels, rotated) if return_vectors else labels


def q_spectrum(N: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact eigenvalues q_m = 2(m-1)/N of Q/N and their degeneracies N+2-m."""
    m = np.arange(1, N + 2)
    return 2.0 * (m - 1) / N, N + 2 - m


def q_sector_hamiltonian(params: ModelParams, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Tridiagonal Hamiltonian of the sector Q = 2m at epsilon = 0.

    With b+- = (a1 +- a3)/sqrt(2), Q = 2 b-^dag b- and the Hamiltonian only involves
    b+ and a2, so fixing m = b-^dag b- leaves a two-mode chain over n+ = 0..N-m
    (n2 = N - m - n+). Returns (diagonal, off-diagonal) for
    :func:`scipy.linalg.eigvalsh_tridiagonal`.
    """
    if params.epsilon != 0:
        raise ValueError("Q sectors exist only for epsilon = 0")
    N = params.N
    if not 0 <= m <= N:
        raise ValueError(f"sector index m must lie in 0..{N}")
    n_plus = np.arange(N - m + 1, dtype=float)
    n2 = N - m - n_plus
    diag = params.U / N * (n_plus + m - n2) ** 2
    off = params.J * np.sqrt((n_plus[:-1] + 1.0) * n2[:-1])
    return diag, off


def q_sector_levels(params: ModelParams, m: int) -> np.ndarray:
    """Ascending energies of the sector with Q/N = 2m/N (N - m + 1 levels)."""
    diag, off = q_sector_hamiltonian(params, m)
    if len(diag) == 1:
        return diag.copy()
    return scipy.linalg.eigvalsh_tridiagonal(diag, off)


# -- eigenstate statistics --------------------------------------------------------

@dataclass(frozen=True)
class EntropyProfile:
    """Per-eigenstate Shannon entropies (nats) in the Fock basis and their running means."""

    scaled_energies: np.ndarray
    sh_total: np.ndarray
    sh_upper: np.ndarray  # Fock states with N2 >= N1 + N3
    sh_lower: np.ndarray  # Fock states with N2 <  N1 + N3
    smooth_total: np.ndarray
    smooth_upper: np.ndarray
    smooth_lower: np.ndarray
    window: int


def shannon_entropy(vectors: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """-sum p ln p over rows (optionally only rows in ``mask``) for each column; p = |v|^2."""
    p = np.abs(np.atleast_2d(vectors.T).T) ** 2
    if mask is not None:
        p = p[mask]
    safe = np.where(p > 1e-300, p, 1.0)
    return -np.sum(np.where(p > 1e-300, p * np.log(safe), 0.0), axis=0)


def running_mean(values: np.ndarray, window: int = 200) -> np.ndarray:
    """Mean over the ``window`` neighbours centred on each index, truncated at the ends."""
    n = len(values)
    half = window // 2
    csum = np.concatenate([[0.0], np.cumsum(values)])
    k = np.arange(n)
    lo = np.maximum(k - half, 0)
    hi = np.minimum(k - half + window, n)
    return (csum[hi] - csum[lo]) / (hi - lo)


def shannon_profile(es: EigenSystem, window: int = 200, chunk: int = 1024) -> EntropyProfile:
    if es.vectors is None:
        raise ValueError("entropy profile needs eigenvectors")
    upper = es.basis.n2 >= es.basis.n1 + es.basis.n3
    n = len(es.energies)
    up = np.empty(n)
    low = np.empty(n)
    for start in range(0, n, chunk):
        cols = slice(start, min(start + chunk, n))
        V = es.vectors[:, cols]
        up[cols] = shannon_entropy(V, upper)
        low[cols] = shannon_entropy(V, ~upper)
    total = up + low
    return EntropyProfile(
        es.scaled_energies,
        total,
        up,
        low,
        running_mean(total, window),
        running_mean(up, window),
        running_mean(low, window),
        window,
    )


def smoothed_slope(scaled_energies: np.ndarray, curve: np.ndarray, window: int = 200) -> np.ndarray:
    """Least-squares slope d(curve)/d(E/N) over the same centred index window as :func:`running_mean`."""
    x = np.asarray(scaled_energies, dtype=float)
    y = np.asarray(curve, dtype=float)
    sx, sy = running_mean(x, window), running_mean(y, window)
    sxx, sxy = running_mean(x * x, window), running_mean(x * y, window)
    var = sxx - sx * sx
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(var > 0, (sxy - sx * sy) / var, 0.0)


def select_near(es: EigenSystem, target: float, count: int) -> np.ndarray:
    """Indices of the ``count`` levels with E/N closest to ``target`` (ties to the lower index), ascending."""
    n = len(es.energies)
    if not 1 <= count <= n:
        raise ValueError(f"count must lie in 1..{n}, got {count}")
    order = np.argsort(np.abs(es.scaled_energies - target), kind="stable")
    return np.sort(order[:count])


def select_window(es: EigenSystem, center: float, width: float) -> np.ndarray:
    """Indices with |E/N - center| < width/2."""
    return np.flatnonzero(np.abs(es.scaled_energies - center) < 0.5 * width)


class SpacingRatio(NamedTuple):
    mean: float
    count: int
    skipped: int


def spacing_ratio(levels, window: slice | tuple[int, int] | None = None, *, zero_tol: float = 1e-10) -> SpacingRatio:
    """Mean of min(s_k, s_k+1)/max(s_k, s_k+1) over consecutive level spacings.

    ``levels`` is an :class:`EigenSystem` or an ascending array; ``window`` picks an
    index range. Spacings below ``zero_tol * max|E|`` count as degeneracies and every
    ratio touching one is skipped (reported in ``skipped``).
    """
    E = levels.energies if isinstance(levels, EigenSystem) else np.asarray(levels, dtype=float)
    if window is not None:
        E = E[window] if isinstance(window, slice) else E[window[0] : window[1]]
    if len(E) < 50:
        raise ValueError(f"spacing statistics need at least 50 levels, got {len(E)}")
    E = np.sort(E)
    s = np.diff(E)
    zero = s <= zero_tol * max(float(np.max(np.abs(E))), 1e-300)
    a, b = s[:-1], s[1:]
    ok = ~(zero[:-1] | zero[1:])
    r = np.minimum(a[ok], b[ok]) / np.maximum(a[ok], b[ok])
    mean = float(np.mean(r)) if len(r) else math.nan  # nan when every spacing is degenerate
    return SpacingRatio(mean, int(ok.sum()), int((~ok).sum()))


def middle_third(n: int) -> slice:
    return slice(n // 3, 2 * n // 3)


# -- persistence --------------------------------------------------------------------

def cache_key(params: ModelParams, tag: str = "full") -> str:
    from . import __version__

    text = f"{params.N}|{params.U!r}|{params.J!r}|{params.epsilon!r}|{tag}|{__version__}|{CACHE_VERSION}"
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def cache_path(directory: str | os.PathLike, params: ModelParams, tag: str = "full") -> Path:
    return Path(directory) / f"eig_N{params.N}_{cache_key(params, tag)}.tw3w"


def save_eigensystem(path: str | os.PathLike, es: EigenSystem) -> None:
    """Write ``es`` to ``path`` atomically (temporary file, then rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    p = es.params
    K = len(es.energies)
    header = _HEADER.pack(
        CACHE_MAGIC,
        CACHE_VERSION,
        p.N,
        p.U,
        p.J,
        p.epsilon,
        es.basis.dim,
        K,
        -1 if es.first_index is None else es.first_index,
        0 if es.vectors is None else 1,
    )
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(header)
            fh.write(np.asarray(es.energies, dtype="<f8").tobytes())
            if es.vectors is not None:
                # column by column keeps peak memory at one eigenvector
                for j in range(K):
                    fh.write(np.asarray(es.vectors[:, j], dtype="<f8").tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_eigensystem(path: str | os.PathLike) -> EigenSystem:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, version, N, U, J, eps, D, K, first, has_vec = _HEADER.unpack(raw)
        if magic != CACHE_MAGIC:
            raise ValueError(f"{path}: not an eigen-system cache (bad magic {magic!r})")
        if version != CACHE_VERSION:
            raise ValueError(f"{path}: unsupported cache version {version}")
        params = ModelParams(U=U, J=J, epsilon=eps, N=N)
        basis = build_basis(N)
        if basis.dim != D:
            raise ValueError(f"{path}: dimension {D} inconsistent with N={N}")
        energies = np.fromfile(fh, dtype="<f8", count=K)
        vectors = None
        if has_vec:
            vectors = np.fromfile(fh, dtype="<f8", count=D * K).reshape(K, D).T
            if vectors.shape != (D, K):
                raise ValueError(f"{path}: truncated eigenvector block")
    if len(energies) != K:
        raise ValueError(f"{path}: truncated energy block")
    return EigenSystem(params, basis, energies, vectors, None if first < 0 else int(first))


def cached_solve(params: ModelParams, cache_dir: str | os.PathLike | None, **kwargs) -> EigenSystem:
    """:func:`solve` backed by a cache file in ``cache_dir`` (no caching when ``None``)."""
    if cache_dir is None:
        return solve(params, **kwargs)
    tag = "|".join(f"{k}={kwargs[k]!r}" for k in sorted(kwargs)) or "full"
    path = cache_path(cache_dir, params, tag)
    if path.exists():
        log.info("eigen-system cache hit: %s (diagonalisation skipped)", path)
        return load_eigensystem(path)
    log.info("diagonalising N=%d (D=%d), %s", params.N, (params.N + 1) * (params.N + 2) // 2, tag)
    es = solve(params, **kwargs)
    save_eigensystem(path, es)
    return es
