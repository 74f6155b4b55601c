import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from triplewell import projections as pj
from triplewell import spectra
from triplewell.fock import build_basis, multinomial_weights
from triplewell.spectra import EigenSystem, ModelParams


def single_fock_system(N, state):
    """Eigen-system whose first eigenvector is one Fock state (other columns complete the basis)."""
    basis = build_basis(N)
    i = basis.index(state)
    order = [i] + [j for j in range(basis.dim) if j != i]
    V = np.eye(basis.dim)[:, order]
    return EigenSystem(ModelParams(N=N), basis, np.arange(basis.dim, dtype=float), V)


@pytest.fixture(scope="module")
def es20():
    return spectra.solve(ModelParams(0.7, 1.0, 1.5, 20))


def test_fock_projection_single_state():
    g = pj.fock_projection(single_fock_system(2, (2, 0, 0)), 0)
    expect = np.zeros((3, 3))
    expect[2, 0] = 1
    assert np.array_equal(g.values, expect)


def test_fock_projection_normalised(es20):
    for k in range(0, len(es20), 17):
        g = pj.fock_projection(es20, k)
        assert abs(g.total() - 1) < 1e-10
        assert np.all(g.values >= 0)
        assert np.all(g.values[~g.mask] == 0)


def test_fock_projection_bad_index(es20):
    with pytest.raises(IndexError):
        pj.fock_projection(es20, len(es20))


def test_parity_symmetry_at_zero_tilt():
    N = 10
    es = spectra.solve(ModelParams(0.7, 1.0, 0.0, N))
    perm = es.basis.swap_permutation()
    for group in spectra.degenerate_groups(es.energies):
        p = sum(np.abs(es.vectors[:, k]) ** 2 for k in group)
        assert np.allclose(p, p[perm], atol=1e-10)
        g = sum(pj.fock_projection(es, k).values for k in group)
        assert np.allclose(g, g.T, atol=1e-10)


def test_coherent_overlap_collapses():
    es = spectra.solve(ModelParams(0.7, 1.0, 1.5, 8))
    ov = pj.coherent_overlap(es, pj.CoherentSpec(1.0, 0.0, 0.3, -1.2))
    i = es.basis.index((8, 0, 0))
    assert np.allclose(ov, es.vectors[i] ** 2, atol=1e-14)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(-10, 10), st.floats(-10, 10))
def test_coherent_completeness_and_periodicity(a, b, p12, p32):
    es = _ES20
    spec = pj.CoherentSpec(a, (1 - a) * b, p12, p32)
    ov = pj.coherent_overlap(es, spec)
    assert abs(ov.sum() - 1) < 1e-8
    shifted = pj.coherent_overlap(es, spec._replace(phi12=p12 + 2 * math.pi, phi32=p32 - 2 * math.pi))
    assert np.allclose(ov, shifted, atol=1e-10)


_ES20 = spectra.solve(ModelParams(0.7, 1.0, 1.5, 20))


def test_coherent_spec_validation():
    with pytest.raises(ValueError):
        pj.coherent_amplitudes(build_basis(3), pj.CoherentSpec(0.7, 0.5))


def test_husimi_single_fock_is_multinomial():
    N, state = 12, (3, 4, 5)
    es = single_fock_system(N, state)
    g = pj.husimi_projection_closed(es, 0)
    b = es.basis
    x1, x3 = b.n1 / N, b.n3 / N
    expect = np.array([multinomial_weights(build_basis(N), u, w, v)[b.index(state)] for u, w, v in zip(x1, b.n2 / N, x3)])
    assert np.allclose(g.values[b.n1, b.n3], expect, rtol=1e-12, atol=1e-300)
    q = pj.husimi_projection_quadrature(es, 0)
    assert np.allclose(q.values, g.values, atol=1e-14)


@pytest.mark.parametrize("state", [(12, 0, 0), (3, 4, 5), (0, 12, 0), (1, 1, 10)])
def test_husimi_peak_at_fock_point(state):
    es = single_fock_system(12, state)
    g = pj.husimi_projection_closed(es, 0)
    assert np.unravel_index(np.argmax(g.values), g.values.shape) == (state[0], state[2])


def test_quadrature_exact_small_N():
    es = spectra.solve(ModelParams(0.7, 1.0, 1.5, 2))
    for k in range(len(es)):
        a = pj.husimi_projection_closed(es, k).values
        b = pj.husimi_projection_quadrature(es, k, 8).values
        assert np.allclose(a, b, atol=1e-12, rtol=0)


def test_quadrature_offset_invariance(es20):
    a = pj.husimi_projection_quadrature(es20, 50).values
    b = pj.husimi_projection_quadrature(es20, 50, offset=0.37).values
    assert np.max(np.abs(a - b)) < 1e-12


def test_quadrature_warns_when_coarse(es20):
    g = pj.husimi_projection_quadrature(es20, 3, phase_points=10)
    assert "warning" in g.meta
    assert "warning" not in pj.husimi_projection_quadrature(es20, 3).meta


def test_closed_equals_quadrature(es20):
    for k in (0, 57, 115, 180, 230):
        a = pj.husimi_projection_closed(es20, k).values
        b = pj.husimi_projection_quadrature(es20, k).values
        assert np.max(np.abs(a - b)) < 1e-10


def test_husimi_smooth_points_and_batch(es20):
    b = es20.basis
    P = np.abs(es20.vectors[:, :3]) ** 2
    batch = pj.husimi_smooth(b, P)
    for k in range(3):
        assert np.allclose(batch[:, k], pj.husimi_smooth(b, P[:, k]))
    off = pj.husimi_smooth(b, P[:, 0], [0.25, 0.0], [0.35, 1.0])
    assert off.shape == (2,) and np.all(off >= 0)


def test_microcanonical_single_state(es20):
    k = int(spectra.select_near(es20, 0.1, 1)[0])
    g = pj.microcanonical_average(es20, 0.1, count=1)
    assert np.array_equal(g.values, pj.fock_projection(es20, k).values)
    assert g.meta["count"] == 1


def test_microcanonical_full_spectrum_is_uniform(es20):
    g = pj.microcanonical_average(es20, 0.0, width=100.0)
    assert g.meta["count"] == len(es20)
    assert np.allclose(g.values[g.mask], 1 / len(es20), atol=1e-14)
    assert abs(g.meta["sum"] - 1) < 1e-10
    s = pj.microcanonical_average(es20, 0.0, width=100.0, smoothed=True)
    assert abs(s.total() - 1) < 1e-10


def test_microcanonical_errors(es20):
    with pytest.raises(ValueError):
        pj.microcanonical_average(es20, 50.0, width=0.01)
    with pytest.raises(ValueError):
        pj.microcanonical_average(es20, 0.0)
    with pytest.raises(ValueError):
        pj.microcanonical_average(es20, 0.0, width=0.1, count=3)


def test_top_components():
    es = single_fock_system(5, (2, 1, 2))
    assert pj.top_components(es, [0], 1).tolist() == [[0.4, 0.4]]
    pts = pj.top_components(_ES20, [1, 2, 3], _ES20.basis.dim)
    assert len(pts) == 3 * _ES20.basis.dim
    uniq, counts = np.unique(pts, axis=0, return_counts=True)
    assert len(uniq) == _ES20.basis.dim and np.all(counts == 3)
    with pytest.raises(ValueError):
        pj.top_components(es, [0], 0)


def test_top_components_tie_break():
    # equal weight on two states: the earlier basis state comes first
    basis = build_basis(2)
    v = np.zeros(basis.dim)
    v[[1, 4]] = 1 / math.sqrt(2)
    V = np.linalg.qr(np.column_stack([v, np.eye(basis.dim)[:, [0, 2, 3, 5, 1]]]))[0]
    V[:, 0] = v
    es = EigenSystem(ModelParams(N=2), basis, np.arange(6.0), V)
    assert pj.top_components(es, [0], 2).tolist() == [[0.5, 0.0], [0.0, 0.5]]


def test_raise_power():
    g = pj.ProbabilityGrid(1, np.array([[0.0016, 0.5], [0.25, 0.0]]))
    assert np.array_equal(pj.raise_power(g, 1).values, g.values)
    r = pj.raise_power(g, 0.25)
    assert r.values[0, 0] == pytest.approx(0.2, rel=1e-14)
    assert np.array_equal(np.argsort(r.values, axis=None), np.argsort(g.values, axis=None))
    with pytest.raises(ValueError):
        pj.raise_power(g, 0)


def test_grid_shape_check():
    with pytest.raises(ValueError):
        pj.ProbabilityGrid(3, np.zeros((3, 3)))
