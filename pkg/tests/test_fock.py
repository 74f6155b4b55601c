import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from triplewell.fock import FockState, build_basis, dimension, log_multinomial, multinomial_weight, multinomial_weights


def enumerate_states(N):
    return [s for s in itertools.product(range(N + 1), repeat=3) if sum(s) == N]


@pytest.mark.parametrize("N", range(1, 31))
def test_dimension_matches_enumeration(N):
    assert dimension(N) == len(enumerate_states(N)) == len(build_basis(N))


def test_dimension_large():
    assert dimension(180) == 16471
    assert math.factorial(182) // (2 * math.factorial(180)) == 16471


def test_order_small():
    b = build_basis(2)
    assert b.states == ((2, 0, 0), (1, 1, 0), (1, 0, 1), (0, 2, 0), (0, 1, 1), (0, 0, 2))


@given(st.integers(1, 40))
def test_index_roundtrip(N):
    b = build_basis(N)
    for i, s in enumerate(b.states):
        assert b.index(s) == i
    assert np.array_equal(b.indices(b.n1, b.n3), np.arange(b.dim))


def test_index_rejects_foreign_state():
    b = build_basis(3)
    with pytest.raises(KeyError):
        b.index((1, 1, 0))
    with pytest.raises(KeyError):
        b.index((4, -1, 0))


def test_basis_immutable():
    b = build_basis(3)
    with pytest.raises(ValueError):
        b.n1[0] = 7


def test_build_rejects_bad_N():
    for N in (0, -2, 2.5):
        with pytest.raises(ValueError):
            build_basis(N)


def test_swap_permutation_is_involution():
    b = build_basis(7)
    p = b.swap_permutation()
    assert np.array_equal(p[p], np.arange(b.dim))
    assert np.array_equal(b.n1[p], b.n3)


def test_state_total():
    assert FockState(1, 2, 3).total == 6


@given(st.integers(1, 25), st.floats(0, 1), st.floats(0, 1))
def test_weights_normalised(N, a, b):
    p1 = a
    p3 = (1 - a) * b
    p2 = 1 - p1 - p3
    w = multinomial_weights(build_basis(N), p1, p2, p3)
    assert np.all(w >= 0)
    assert abs(w.sum() - 1) < 1e-12


def test_weight_known_values():
    assert multinomial_weight((1, 1, 0), 0.5, 0.5, 0.0) == pytest.approx(0.5, abs=1e-15)
    assert multinomial_weight((2, 0, 0), 1.0, 0.0, 0.0) == 1.0
    assert multinomial_weight((0, 2, 0), 1.0, 0.0, 0.0) == 0.0
    assert multinomial_weight((1, 1, 1), 1 / 3, 1 / 3, 1 / 3) == pytest.approx(6 / 27, rel=1e-14)


def test_log_space_large_N():
    # N! alone overflows double precision; the weight must not
    N = 2000
    w = multinomial_weight((700, 600, 700), 0.35, 0.3, 0.35)
    ref = math.exp(math.lgamma(N + 1) - 2 * math.lgamma(701) - math.lgamma(601) + 1400 * math.log(0.35) + 600 * math.log(0.3))
    assert w == pytest.approx(ref, rel=1e-10)
    assert np.isfinite(log_multinomial(0, 0, N, 0.0, 0.0, 1.0))


def test_weight_rejects_bad_probabilities():
    with pytest.raises(ValueError):
        multinomial_weight((1, 0, 0), 0.6, 0.6, -0.2)
    with pytest.raises(ValueError):
        multinomial_weight((1, 0, 0), 0.5, 0.4, 0.0)
    with pytest.raises(ValueError):
        multinomial_weights(build_basis(2), [0.5, 0.2], [0.5, 0.2], [0.0, 0.2])


def test_weights_broadcast_shape():
    b = build_basis(4)
    p1 = np.array([0.2, 0.5, 0.1])
    w = multinomial_weights(b, p1, 0.5 * (1 - p1), 0.5 * (1 - p1))
    assert w.shape == (3, b.dim)
    assert np.allclose(w.sum(axis=1), 1, atol=1e-13)
