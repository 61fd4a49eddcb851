import math
from dataclasses import replace

import numpy as np
import pytest

from lagflow import families as fam
from lagflow import flow as fl
from lagflow.errors import BadResolution, ScaleCollapse, StepTooLarge


def test_init_guards():
    clifford = fam.make_clifford(-0.5)
    with pytest.raises(BadResolution):
        fl.init_flow(clifford, 16)
    with pytest.raises(StepTooLarge):
        fl.init_flow(clifford, 32, dt=1.0)
    state = fl.init_flow(fam.make_phi_pq(0.25, 2, 1), (32, 9))
    assert state.boundary == ("periodic", "pinned")
    assert state.dt == pytest.approx(0.5 * fl.cfl_limit(state.grid, *state.h_param, state.periodic))


def test_step_is_deterministic_and_keeps_pinned_rows_exact():
    surface = fam.make_phi_pq(0.25, 2, 1)
    a = fl.init_flow(surface, (32, 17))
    b = fl.init_flow(surface, (32, 17))
    for _ in range(5):
        a, b = fl.step(a), fl.step(b)
    assert np.array_equal(a.grid, b.grid)
    exact = math.sqrt(2 * 0.25 * a.time + 1) * surface(a.s, a.t)
    np.testing.assert_allclose(a.grid[:, [0, -1]], exact[:, [0, -1]], atol=1e-14)


def test_scale_collapse():
    # past T = -1/(2a) = 1 the exact solution sqrt(2at + 1) phi no longer exists
    late = replace(fl.init_flow(fam.make_clifford(-0.5), 32), time=1.5)
    with pytest.raises(ScaleCollapse):
        fl.self_similarity_error(late, late.surface, -0.5)
    pinned = replace(fl.init_flow(fam.make_cylinder(-0.5), (32, 9)), time=0.99)
    with pytest.raises(ScaleCollapse):
        fl.step(pinned, dt=0.02)


def test_self_similarity_error_zero_at_start():
    state = fl.init_flow(fam.make_psi_mn(-0.5, 1, 2), 32)
    assert fl.self_similarity_error(state, state.surface, -0.5) < 1e-10


def test_area_monotone_on_shrinker():
    state = fl.init_flow(fam.make_psi_mn(-0.5, 1, 2), 32)
    traj = fl.run(state, 0.1, sample_dt=0.005, track_ss=False)
    areas = np.array(traj.area)
    assert np.all(np.diff(areas) <= 1e-10 * areas[:-1])
    assert traj.reason == "t_end" and traj.final.time == pytest.approx(0.1)


def test_extinction_estimate_of_a_line():
    t = np.linspace(0, 0.5, 20)
    assert fl.extinction_estimate(t, 4 - 4 * t) == pytest.approx(1.0)


@pytest.mark.slow
def test_clifford_extinction_consistent_under_dt_halving():
    surface = fam.make_clifford(-0.5)
    state = fl.init_flow(surface, 32)
    est = []
    for dt in (state.dt, state.dt / 2):
        traj = fl.run(fl.init_flow(surface, 32, dt=dt), 1.2, sample_dt=0.01, track_ss=False)
        est.append(traj.T_est)
    assert abs(est[1] - est[0]) <= 0.005 * est[1]
    assert est[1] == pytest.approx(1.0, abs=0.03)


@pytest.mark.slow
def test_self_similarity_error_decreases_under_refinement():
    surface = fam.make_psi_mn(-0.5, 1, 2)
    errs = []
    for n in (32, 64):
        traj = fl.run(fl.init_flow(surface, n), 0.3, sample_dt=0.3)
        errs.append(traj.ss_error[-1])
    assert errs[1] < errs[0] and errs[1] <= 0.01


@pytest.mark.slow
def test_expander_area_grows_like_scale_squared():
    surface = fam.make_phi_pq(0.25, 2, 1)
    state = fl.init_flow(surface, (64, 33))
    traj = fl.run(state, 0.5, sample_dt=0.1, ss_every=5, interior=2)
    ratio = traj.area[-1] / traj.area[0]
    assert ratio == pytest.approx(2 * 0.25 * traj.time[-1] + 1, rel=0.02)
