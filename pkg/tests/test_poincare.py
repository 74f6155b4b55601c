import math

import numpy as np
import pytest

from triplewell import classical as c
from triplewell import poincare as pc
from triplewell.spectra import ModelParams

CHAOTIC = ModelParams(0.7, 1.0, 1.5, 100)
E_CRIT = 0.0752


@pytest.fixture(scope="module")
def chaotic_traj():
    y0 = np.asarray(c.cartesian_from_angles(c.solve_rho2_zero(CHAOTIC, E_CRIT).at(0.0, 0.0)))
    return c.integrate(y0, CHAOTIC, 1000.0, 0.01)


def synthetic(states, dt=0.01, params=CHAOTIC):
    states = np.asarray(states, dtype=float)
    t = np.arange(len(states)) * dt
    return c.Trajectory(t, states, params, 0.0, 0.0, None)


def test_no_crossings_off_section():
    # phi32 held at pi/2 never meets phi32 = 0
    view = [(0.3, 0.3, 0.1 * k, math.pi / 2) for k in range(50)]
    traj = synthetic(c.cartesian_from_angles(np.array(view)))
    assert pc.section(traj, 0.0) == []


def test_undersampled_trajectory_rejected():
    view = [(0.3, 0.3, 0.0, wrap) for wrap in np.linspace(0, 8, 5)]  # 2 rad per sample
    traj = synthetic(c.cartesian_from_angles(np.array(view)))
    with pytest.raises(pc.UndersampledError):
        pc.section(traj, 0.0)


def test_events_on_surface_and_shell(chaotic_traj):
    for phi in (0.0, math.pi):
        events, dropped = pc.section(chaotic_traj, phi, report=True)
        assert events
        for e in events:
            ang = c.to_angles(e.state)
            assert abs(c.wrap_phase(ang.phi32 - phi)) <= 1e-9
            assert c.energy_cartesian(e.state, CHAOTIC) == pytest.approx(E_CRIT, abs=1e-8)
            assert (e.n1, e.n3, e.phi12) == pytest.approx((ang.n1, ang.n3, ang.phi12))
            assert e.direction in (-1, 1)
        t = [e.t for e in events]
        assert t == sorted(t)


def test_direction_filter(chaotic_traj):
    both = pc.section(chaotic_traj, 0.0)
    pos = pc.section(chaotic_traj, 0.0, "positive")
    neg = pc.section(chaotic_traj, 0.0, "negative")
    assert len(pos) + len(neg) == len(both)
    assert all(e.direction == 1 for e in pos) and all(e.direction == -1 for e in neg)
    with pytest.raises(ValueError):
        pc.section(chaotic_traj, 0.0, "sideways")


def test_refinement_converged(chaotic_traj):
    short = c.Trajectory(chaotic_traj.t[:20001], chaotic_traj.states[:20001], CHAOTIC, 0, 0, None, 0, chaotic_traj.integrator)
    a = pc.section(short, math.pi, tol=1e-9)
    b = pc.section(short, math.pi, tol=5e-10)
    assert len(a) == len(b)
    for x, y in zip(a, b):
        assert max(abs(x.n1 - y.n1), abs(x.n3 - y.n3), abs(x.phi12 - y.phi12)) < 1e-6


def test_integrable_events_share_Q():
    p = CHAOTIC.replace(epsilon=0.0)
    seed = pc.section_seeds(p, E_CRIT, 3)[1]
    traj = c.integrate(np.asarray(c.cartesian_from_angles(seed)), p, 300.0, 0.01)
    events = pc.section(traj)
    assert len(events) > 5
    Q = np.array([c.classical_Q(e.state) for e in events])
    assert np.ptp(Q) < 1e-8


def test_section_seeds_deterministic():
    a = pc.section_seeds(CHAOTIC, E_CRIT, 30)
    b = pc.section_seeds(CHAOTIC, E_CRIT, 30)
    assert a == b and len(a) == 30
    for s in a:
        assert s.phi32 == 0.0
        assert c.energy_angles(s, CHAOTIC) == pytest.approx(E_CRIT, abs=1e-11)
    with pytest.raises(ValueError):
        pc.section_seeds(CHAOTIC, 50.0, 3)
    with pytest.raises(ValueError):
        pc.section_seeds(CHAOTIC, E_CRIT, 0)


def test_ensemble_single_seed_equals_section():
    seeds = pc.section_seeds(CHAOTIC, E_CRIT, 1)
    ens = pc.ensemble_section(CHAOTIC, E_CRIT, 1, t_short=50.0)
    traj = c.integrate(np.asarray(c.cartesian_from_angles(seeds[0])), CHAOTIC, 50.0, 0.01)
    ref = pc.section(traj)
    assert len(ens.events) == len(ref)
    for a, b in zip(ens.events, ref):
        assert a.t == b.t and np.array_equal(a.state, b.state)
    assert ens.failures == []


def test_ensemble_continues_after_failure():
    good = pc.section_seeds(CHAOTIC, E_CRIT, 2)
    bad = c.AngleActionView(0.9, 0.9, 0.0, 0.0)  # off the simplex
    ens = pc.ensemble_section(CHAOTIC, E_CRIT, 3, t_short=10.0, seeds=[good[0], bad, good[1]])
    assert [f[0] for f in ens.failures] == [1]
    assert {e.seed_id for e in ens.events} <= {0, 2}
    ids = [e.seed_id for e in ens.events]
    assert ids == sorted(ids)


def test_histogram_basics(chaotic_traj):
    h = pc.visitation(chaotic_traj, 50)
    assert h.counts.sum() == h.total == len(chaotic_traj)
    i = np.arange(50)
    outside = i[:, None] + i[None, :] > 50
    assert h.counts[outside].sum() == 0
    assert (h + h).total == 2 * h.total
    with pytest.raises(ValueError):
        h + pc.visitation(chaotic_traj, 40)
    with pytest.raises(ValueError):
        pc.histogram_points([0.1], [0.1], 1)


def test_histogram_constant_trajectory():
    y = np.asarray(c.cartesian_from_angles((0.31, 0.22, 0.0, 0.0)))
    h = pc.visitation(synthetic(np.tile(y, (40, 1))), 20)
    assert h.counts.max() == 40 and np.count_nonzero(h.counts) == 1
    assert h.counts[6, 4] == 40
    assert h.density().sum() == pytest.approx(1.0)
