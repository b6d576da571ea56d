import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccma.forward import (
    ROUNDING,
    SolverError,
    SolverOptions,
    control_to_rates,
    integrate,
    rates_jacobians,
    rollout,
    solve_state,
)

from conftest import central_diff, shipped

finite = st.floats(-5, 5, allow_nan=False)


def test_zero_controls_give_zero_rates():
    assert np.array_equal(control_to_rates(np.zeros(6), np.ones(9), 3), np.zeros(9))


def test_rates_examples():
    assert np.allclose(control_to_rates([1.0, 0.0], [0.0, 0.0, 0.0], 1), [0, 1, 0])
    a = control_to_rates([2.0, 0.3], [np.pi / 2, 5.0, 6.0], 1)
    assert np.allclose(a, [0.3, 0, 2], atol=1e-12)


def test_joint_rates_pass_through():
    a = control_to_rates([1.0, 0.5, 0.7, -0.2], [0.0, 0, 0, 1.0, 2.0], 1)
    assert np.array_equal(a[3:], [0.7, -0.2])


def test_rates_jacobians_match_finite_differences():
    rng = np.random.default_rng(0)
    u, m = rng.standard_normal(8), rng.standard_normal(11)
    da_dm, da_du = rates_jacobians(u, m, 3)
    assert np.allclose(da_dm, central_diff(lambda x: control_to_rates(u, x, 3), m), atol=1e-9)
    assert np.allclose(da_du, central_diff(lambda x: control_to_rates(x, m, 3), u), atol=1e-9)


def test_integrate_examples():
    m = np.array([0.3, 1.0, -2.0])
    assert np.array_equal(integrate(m, np.zeros(3), 0.1), m)
    assert np.allclose(integrate(np.zeros(3), [1.0, 0, 0], 0.1), [0.1, 0, 0])
    with pytest.raises(ValueError):
        integrate(m, m, -0.1)


@given(st.lists(finite, min_size=3, max_size=3), st.lists(finite, min_size=3, max_size=3),
       st.floats(0, 1))
def test_integrate_is_linear_in_rates(m, a, dt):
    m, a = np.array(m), np.array(a)
    lhs = integrate(m, 2 * a, dt) - m
    rhs = 2 * (integrate(m, a, dt) - m)
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(finite, finite, finite, st.floats(0.001, 0.5))
def test_base_moves_along_heading(theta, v, omega, dt):
    m = np.array([theta, 0.3, -0.4])
    m1 = integrate(m, control_to_rates([v, omega], m, 1), dt)
    d = m1[1:] - m[1:]
    # cross product of displacement and heading vanishes
    assert abs(d[0] * np.sin(theta) - d[1] * np.cos(theta)) <= 1e-12 * max(1.0, np.linalg.norm(d))
    assert m1[0] - m[0] == pytest.approx(omega * dt, rel=1e-12, abs=1e-15)


def test_feasible_solve_reaches_tolerance(tripod):
    rng = np.random.default_rng(1)
    st_init = tripod.st0 + 0.01 * rng.standard_normal(tripod.st0.size)
    res = solve_state(tripod.system(), tripod.m0, st_init)
    assert res.converged
    assert res.residual_energy <= 1e-16
    assert res.grad_norm <= 1e-10


def test_warm_start_at_solution_takes_at_most_one_iteration(tripod):
    res = solve_state(tripod.system(), tripod.m0, tripod.st0)
    assert res.iterations <= 1
    assert res.residual_energy <= 1e-16


def test_unreachable_extension_converges_to_infeasible_minimum():
    sc = shipped("gradcheck_chain")
    m = sc.m0.copy()
    m[4] += 3.0  # base separation 5 m against a 2 m bar
    res = solve_state(sc.system(), m, sc.st0, SolverOptions(max_iter=200))
    assert res.converged
    assert res.residual_energy > 1e-3
    assert res.grad_norm <= 1e-10


def test_energy_monotone_over_accepted_iterations():
    sc = shipped("fig1b")
    rng = np.random.default_rng(2)
    m = sc.m0 + 0.2 * rng.standard_normal(sc.m0.size)
    energies = []
    for k in range(15):
        opts = SolverOptions(max_iter=k, polish=0)
        energies.append(solve_state(sc.system(), m, sc.st0, opts).residual_energy)
    for prev, cur in zip(energies, energies[1:]):
        assert cur <= prev * (1 + ROUNDING) + 1e-32
    assert energies[-1] < energies[0]


def test_solve_depends_only_on_inputs(tripod):
    m = tripod.m0 + np.r_[0.1, 0.05, 0, 0, 0, 0, 0, 0, 0]
    a = solve_state(tripod.system(), m, tripod.st0)
    b = solve_state(tripod.system(), m, tripod.st0.copy())
    assert np.array_equal(a.state, b.state)


def test_nonfinite_target_raises_solver_error(tripod):
    m = tripod.m0.copy()
    m[1] = np.nan
    with pytest.raises(SolverError):
        solve_state(tripod.system(), m, tripod.st0)


@pytest.mark.parametrize("name", ["fig2a", "fig1b", "fig4", "gradcheck_chain"])
def test_zero_controls_keep_everything_fixed(name):
    sc = shipped(name)
    traj = sc.simulate()
    assert np.array_equal(traj.ms, np.tile(sc.m0, (sc.n_t, 1)))
    assert np.abs(traj.states - sc.st0).max() <= 1e-12
    assert traj.residual_energies.max() <= 1e-10


def test_common_drive_translates_mechanism():
    sc = shipped("fig4")
    u = sc.zero_controls()
    u[:, 0:2 * sc.topology.n_m:2] = 0.5  # every base drives forward along +x
    traj = sc.simulate(u)
    assert traj.n_t == 20
    assert traj.residual_energies.max() <= 1e-10
    shift = traj.states[-1].reshape(-1, 6)[:, 3] - sc.st0.reshape(-1, 6)[:, 3]
    assert np.allclose(shift, 0.5 * 0.1 * 19, atol=1e-9)


def test_single_base_straight_line(single_link):
    sc = dataclasses.replace(single_link, n_t=6)
    u = np.tile([1.0, 0.0, 0.0], (5, 1))
    traj = sc.simulate(u)
    assert traj.ms[-1][1] - traj.ms[0][1] == pytest.approx(0.5, abs=1e-12)
    assert traj.ms[-1][2] == traj.ms[0][2]
    base = traj.states[-1][:6]
    assert base[3] == pytest.approx(0.5, abs=1e-9)


def test_rollout_shapes_and_step_count(tripod):
    rng = np.random.default_rng(3)
    u = 0.05 * rng.standard_normal(tripod.control_shape)
    traj = rollout(tripod.system(), tripod.st0, tripod.m0, u, tripod.dt)
    assert traj.states.shape == (tripod.n_t, tripod.st0.size)
    assert len(traj.steps) == tripod.n_t - 1
    assert traj.converged


def test_rollout_wrong_control_shape(tripod):
    from ccma.constraints import DimensionError
    with pytest.raises(DimensionError):
        tripod.simulate(np.zeros((3, 2)))


def test_unknown_hessian_mode():
    with pytest.raises(ValueError):
        SolverOptions(hessian="bfgs")


def test_gauss_newton_mode_also_converges(tripod):
    m = tripod.m0 + np.tile([0.0, 0.05, 0.02], 3)
    res = solve_state(tripod.system(), m, tripod.st0, SolverOptions(hessian="gauss_newton"))
    assert res.converged and res.residual_energy <= 1e-16
