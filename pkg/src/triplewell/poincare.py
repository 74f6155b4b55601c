"""Poincare sections on the surfaces phi32 = const and classical visitation histograms."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _taylor, classical
from .classical import AngleActionView, IntegrationError, Trajectory, wrap_phase
from .spectra import ModelParams

log = logging.getLogger(__name__)

# below this modulus the phase of well 2 or 3 is numerically meaningless
_PHASE_RHO_MIN = 1e-8
# phase jumps next to a nearly empty well do not count as undersampling
_UNDERSAMPLE_RHO_MIN = 1e-2


class UndersampledError(ValueError):
    pass


class SectionEvent(NamedTuple):
    t: float
    n1: float
    n3: float
    phi12: float
    direction: int
    state: np.ndarray
    seed_id: int = 0


def _phase_offset(states: np.ndarray, phi_section: float) -> np.ndarray:
    ang = np.asarray(classical.to_angles(states))
    return wrap_phase(ang[..., 3] - phi_section)


def _rho(states: np.ndarray):
    pops = classical.populations(states)
    return np.sqrt(pops[..., 1]), np.sqrt(pops[..., 2])


def section(
    traj: Trajectory,
    phi_section: float = 0.0,
    direction: str = "both",
    *,
    tol: float = 1e-9,
    report: bool = False,
    seed_id: int = 0,
):
    """Crossings of ``traj`` with the surface phi32 = ``phi_section``.

    Sign changes of wrap(phi32 - phi_section) between consecutive samples are
    refined by bisection in time, re-integrating from the earlier sample, until
    the phase is within ``tol`` of the surface. Crossings next to rho2 = 0 or
    rho3 = 0 are dropped; ``report=True`` returns ``(events, dropped)``.
    """
    if direction not in ("both", "positive", "negative"):
        raise ValueError(f"direction must be both, positive or negative, not {direction!r}")
    states = traj.states
    events: list[SectionEvent] = []
    dropped = 0
    if len(states) < 2:
        return (events, dropped) if report else events

    d = _phase_offset(states, phi_section)
    rho2, rho3 = _rho(states)
    jump = np.abs(wrap_phase(np.diff(d)))
    well_defined = (np.minimum(rho2[:-1], rho2[1:]) > _UNDERSAMPLE_RHO_MIN) & (
        np.minimum(rho3[:-1], rho3[1:]) > _UNDERSAMPLE_RHO_MIN
    )
    if np.any(jump[well_defined] >= 0.5 * math.pi):
        k = int(np.flatnonzero(well_defined & (jump >= 0.5 * math.pi))[0])
        raise UndersampledError(f"phi32 changes by {jump[k]:.3f} rad between samples at t={traj.t[k]:.6g}; reduce sample_dt")

    a, b = d[:-1], d[1:]
    near = (np.abs(a) < 0.5 * math.pi) & (np.abs(b) < 0.5 * math.pi)
    cross = near & (((a < 0) & (b >= 0)) | ((a > 0) & (b <= 0)))
    dt = traj.sample_dt
    params = traj.params
    opts = dict(atol=traj.integrator.get("atol", 1e-12), rtol=traj.integrator.get("rtol", 1e-12))
    for k in np.flatnonzero(cross):
        sign = 1 if b[k] > a[k] else -1
        if (direction == "positive" and sign < 0) or (direction == "negative" and sign > 0):
            continue
        y, tau = _refine(states[k], dt, params, phi_section, tol, opts)
        r2, r3 = _rho(y)
        if r2 < _PHASE_RHO_MIN or r3 < _PHASE_RHO_MIN:
            dropped += 1
            continue
        n1, n3, phi12, _ = classical.to_angles(y)
        events.append(SectionEvent(float(traj.t[k] + tau), n1, n3, phi12, sign, y, seed_id))
    return (events, dropped) if report else events


def _refine(y0, dt, params, phi_section, tol, opts):
    return _taylor.bisect_crossing(
        np.ascontiguousarray(y0, dtype=float),
        params.U,
        params.J,
        params.epsilon,
        float(dt),
        float(phi_section),
        tol,
        25,
        opts["atol"],
        opts["rtol"],
    )


class EnsembleSection(NamedTuple):
    events: list
    seeds: list
    failures: list


def section_seeds(params: ModelParams, E: float, count: int, phi_section: float = 0.0) -> list[AngleActionView]:
    """``count`` initial conditions on the surface at energy E from a uniform (n1, phi12) grid.

    The grid is refined until it yields at least ``count`` solutions, which are
    then thinned evenly; the result is deterministic.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    m = max(4, int(math.ceil(math.sqrt(count))))
    m_max = max(64, 8 * m)
    candidates = []
    while m <= m_max:
        candidates = []
        for n1 in (np.arange(m) + 0.5) / m:
            for phi12 in -math.pi + 2 * math.pi * (np.arange(m) + 0.5) / m:
                candidates.extend(classical.solve_on_section(params, E, float(n1), float(phi12), phi_section))
        if len(candidates) >= count:
            pick = np.unique(np.round(np.linspace(0, len(candidates) - 1, count)).astype(int))
            return [candidates[i] for i in pick]
        if not candidates and m >= 16:
            break
        m *= 2
    if not candidates:
        raise ValueError(f"energy {E} does not intersect the surface phi32 = {phi_section}")
    return candidates


def ensemble_section(
    params: ModelParams,
    E: float,
    count: int,
    t_short: float = 100.0,
    phi_section: float = 0.0,
    *,
    direction: str = "both",
    sample_dt: float = 0.01,
    seeds: list | None = None,
) -> EnsembleSection:
    """Short-time section of many trajectories seeded on the surface at energy E.

    Events are ordered by (seed index, time). A failing seed is logged and
    recorded in ``failures``; the rest of the ensemble still runs.
    """
    seeds = section_seeds(params, E, count, phi_section) if seeds is None else list(seeds)
    events: list[SectionEvent] = []
    failures = []
    for i, seed in enumerate(seeds):
        try:
            traj = classical.integrate(classical.cartesian_from_angles(seed), params, t_short, sample_dt)
            events.extend(section(traj, phi_section, direction, seed_id=i))
        except (IntegrationError, UndersampledError, ValueError) as exc:
            log.warning("seed %d failed: %s", i, exc)
            failures.append((i, str(exc)))
    return EnsembleSection(events, seeds, failures)


@dataclass(eq=False)
class VisitationHistogram:
    """Sample counts on a uniform bins x bins grid over (n1, n3) in [0, 1]^2; indexed [i_n1, i_n3]."""

    bins: int
    counts: np.ndarray
    total: int

    def __add__(self, other: "VisitationHistogram") -> "VisitationHistogram":
        if other.bins != self.bins:
            raise ValueError("histograms with different binning cannot be merged")
        return VisitationHistogram(self.bins, self.counts + other.counts, self.total + other.total)

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.bins + 1)

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.bins) + 0.5) / self.bins

    def density(self) -> np.ndarray:
        return self.counts / max(self.total, 1)


def histogram_points(n1, n3, bins: int = 200) -> VisitationHistogram:
    if bins < 2:
        raise ValueError("need at least 2 bins per axis")
    n1 = np.asarray(n1, dtype=float)
    n3 = np.asarray(n3, dtype=float)
    i = np.clip((n1 * bins).astype(np.int64), 0, bins - 1)
    j = np.clip((n3 * bins).astype(np.int64), 0, bins - 1)
    counts = np.zeros((bins, bins), dtype=np.int64)
    np.add.at(counts, (i, j), 1)
    return VisitationHistogram(bins, counts, int(n1.size))


def visitation(traj: Trajectory, bins: int = 200) -> VisitationHistogram:
    """Residence-time histogram of the trajectory on the (N1/N, N3/N) plane."""
    pops = traj.populations()
    return histogram_points(pops[:, 0], pops[:, 2], bins)
