"""Quantitative comparison of quantum lattice grids with classical histograms.

Everything is moved onto a common uniform ``bins x bins`` grid over
(N1/N, N3/N) in [0, 1]^2 before comparing. Lattice point ``n`` of an N-boson
grid stands for the interval [(n - 1/2)/N, (n + 1/2)/N] clipped to [0, 1]; its
mass is shared between histogram bins in proportion to overlap length on each
axis, so the remap conserves total mass.
"""
from __future__ import annotations

import logging
import warnings
from typing import NamedTuple

import numpy as np

from .poincare import VisitationHistogram, histogram_points
from .projections import ProbabilityGrid

log = logging.getLogger(__name__)


class Correspondence(NamedTuple):
    pearson: float
    cells: int
    overlap_cells: int
    peak_distance: float
    peak_a: tuple[float, float]
    peak_b: tuple[float, float]

    def as_record(self) -> dict:
        return {
            "pearson": self.pearson,
            "cells": self.cells,
            "overlap_cells": self.overlap_cells,
            "peak_distance": self.peak_distance,
            "peak_a": list(self.peak_a),
            "peak_b": list(self.peak_b),
        }


def lattice_to_bins(N: int, bins: int) -> np.ndarray:
    """``(N+1, bins)`` matrix whose row n gives the fraction of lattice cell n inside each bin."""
    lo = np.clip((np.arange(N + 1) - 0.5) / N, 0.0, 1.0)
    hi = np.clip((np.arange(N + 1) + 0.5) / N, 0.0, 1.0)
    edges = np.linspace(0.0, 1.0, bins + 1)
    overlap = np.clip(np.minimum(hi[:, None], edges[None, 1:]) - np.maximum(lo[:, None], edges[None, :-1]), 0.0, None)
    return overlap / (hi - lo)[:, None]


def grid_to_bins(grid: ProbabilityGrid, bins: int = 200) -> np.ndarray:
    """Mass-conserving remap of a lattice grid onto ``bins x bins`` cells indexed [i_n1, i_n3]."""
    A = lattice_to_bins(grid.N, bins)
    return A.T @ grid.values @ A


def simplex_cells(bins: int) -> np.ndarray:
    """Cells of the uniform grid that intersect the simplex n1 + n3 <= 1."""
    i = np.arange(bins)
    return i[:, None] + i[None, :] <= bins


def points_histogram(points: np.ndarray, bins: int = 200) -> VisitationHistogram:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    return histogram_points(pts[:, 0], pts[:, 1], bins)


def _as_density(x, bins: int | None) -> np.ndarray:
    if isinstance(x, VisitationHistogram):
        return x.density()
    if isinstance(x, ProbabilityGrid):
        if bins is None:
            raise ValueError("a lattice grid needs a bin count to be compared with a histogram")
        return grid_to_bins(x, bins)
    return np.asarray(x, dtype=float)


def _peak(d: np.ndarray) -> tuple[float, float]:
    i, j = np.unravel_index(int(np.argmax(d)), d.shape)
    b = d.shape[0]
    return (float((i + 0.5) / b), float((j + 0.5) / b))


def correspond(a, b, bins: int | None = None) -> Correspondence:
    """Pearson correlation of two densities over the cells touching the simplex.

    ``a`` and ``b`` may be :class:`ProbabilityGrid`, :class:`VisitationHistogram`
    or plain square arrays. Grids are remapped to ``bins`` (default: the other
    argument's binning). Densities with no common nonzero cell give a warning.
    """
    if bins is None:
        for x in (a, b):
            if isinstance(x, VisitationHistogram):
                bins = x.bins
            elif not isinstance(x, ProbabilityGrid):
                bins = np.shape(x)[0]
    da, db = _as_density(a, bins), _as_density(b, bins)
    if da.shape != db.shape or da.ndim != 2 or da.shape[0] != da.shape[1]:
        raise ValueError(f"cannot compare densities of shapes {da.shape} and {db.shape}")
    cells = simplex_cells(da.shape[0])
    x, y = da[cells], db[cells]
    overlap = int(np.count_nonzero((x > 0) & (y > 0)))
    if overlap == 0:
        warnings.warn("the two densities have disjoint supports", RuntimeWarning, stacklevel=2)
    sx, sy = x.std(), y.std()
    r = float(np.mean((x - x.mean()) * (y - y.mean())) / (sx * sy)) if sx > 0 and sy > 0 else 0.0
    pa, pb = _peak(da), _peak(db)
    dist = float(np.hypot(pa[0] - pb[0], pa[1] - pb[1]))
    return Correspondence(r, int(cells.sum()), overlap, dist, pa, pb)
