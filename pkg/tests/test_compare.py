import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from triplewell import compare as cm
from triplewell.poincare import histogram_points
from triplewell.projections import ProbabilityGrid


@given(st.integers(2, 60), st.integers(2, 80))
def test_lattice_remap_conserves_mass(N, bins):
    A = cm.lattice_to_bins(N, bins)
    assert A.shape == (N + 1, bins)
    assert np.allclose(A.sum(axis=1), 1.0)
    rng = np.random.default_rng(N * 1000 + bins)
    vals = rng.random((N + 1, N + 1))
    vals[np.add.outer(np.arange(N + 1), np.arange(N + 1)) > N] = 0
    g = ProbabilityGrid(N, vals / vals.sum())
    assert cm.grid_to_bins(g, bins).sum() == pytest.approx(1.0)


def test_remap_identity_when_bins_align():
    # with bins = N the half-cells at the borders are clipped, so each lattice point maps to one or two bins
    A = cm.lattice_to_bins(4, 4)
    assert np.allclose(A[0], [1, 0, 0, 0]) and np.allclose(A[4], [0, 0, 0, 1])
    assert np.allclose(A[1], [0.5, 0.5, 0, 0])


def test_self_correlation():
    rng = np.random.default_rng(0)
    h = histogram_points(rng.random(1000) * 0.5, rng.random(1000) * 0.5, 30)
    r = cm.correspond(h, h)
    assert r.pearson == pytest.approx(1.0)
    assert r.peak_distance == 0.0


def test_disjoint_supports_warn():
    a = histogram_points(np.full(10, 0.05), np.full(10, 0.05), 20)
    b = histogram_points(np.full(10, 0.8), np.full(10, 0.1), 20)
    with pytest.warns(RuntimeWarning):
        r = cm.correspond(a, b)
    assert abs(r.pearson) < 0.01
    assert r.overlap_cells == 0
    assert r.peak_distance == pytest.approx(np.hypot(0.75, 0.05))


def test_shape_mismatch():
    with pytest.raises(ValueError):
        cm.correspond(np.zeros((4, 4)), np.zeros((5, 5)))


def test_grid_needs_bins():
    g = ProbabilityGrid(2, np.eye(3) / 3)
    with pytest.raises(ValueError):
        cm.correspond(g, g)
    assert cm.correspond(g, g, bins=10).pearson == pytest.approx(1.0)


def test_simplex_cells():
    m = cm.simplex_cells(4)
    assert m.sum() == 13
    assert m[0, 3] and not m[3, 3]


def test_points_histogram():
    pts = np.array([[0.1, 0.2], [0.1, 0.2], [0.9, 0.05]])
    h = cm.points_histogram(pts, 10)
    assert h.total == 3 and h.counts[1, 2] == 2 and h.counts[9, 0] == 1
