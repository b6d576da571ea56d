import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccma.objectives import (
    Cylinder,
    EndEffectorGoal,
    ObjectiveConfig,
    ObstacleSet,
    PenaltyParams,
    base_pair_distances,
    decompose_spheres,
    end_effector_pose,
    f_pen,
    objective_acc,
    objective_ee,
    objective_eoa,
    objective_ica,
    sphere_obstacle_distances,
)
from ccma.topology import BodyDef, DesignPoint, EndEffector, MobileBaseSpec, RobotTopology

from conftest import central_diff, shipped

params_st = st.tuples(st.floats(1.0, 1e6), st.floats(1e-3, 1.0))


def numeric_fpen_derivative(x, p, h=1e-7):
    return (f_pen(x + h, p)[0] - f_pen(x - h, p)[0]) / (2 * h)


def test_fpen_examples():
    p = PenaltyParams()
    assert f_pen(2 * p.eps, p) == (0.0, 0.0)
    val, der = f_pen(p.eps, p)
    assert abs(val) <= 1e-12 * p.k * p.eps ** 2 and abs(der) <= 1e-12 * p.k * p.eps
    assert f_pen(0.0, p)[0] == pytest.approx(p.k * p.eps ** 2 / 6, rel=1e-14)
    assert f_pen(-1.0, p)[0] > f_pen(-0.5, p)[0] > f_pen(0.0, p)[0]


@settings(max_examples=200, deadline=None)
@given(params_st, st.floats(-2, 2))
def test_fpen_nonnegative_and_derivative_consistent(kp, x):
    p = PenaltyParams(*kp)
    val, der = f_pen(x, p)
    assert val >= 0.0
    assert der <= 0.0
    if abs(x) > 1e-5 and abs(x - p.eps) > 1e-5:
        assert der == pytest.approx(numeric_fpen_derivative(x, p), rel=1e-5, abs=1e-6 * p.k * p.eps)


@settings(max_examples=200, deadline=None)
@given(params_st, st.floats(-2, 1), st.floats(0, 1))
def test_fpen_monotone_below_eps(kp, x, frac):
    p = PenaltyParams(*kp)
    x = min(x, p.eps)
    y = x + frac * (p.eps - x)
    assert f_pen(y, p)[0] <= f_pen(x, p)[0] + 1e-12 * p.k * p.eps ** 2


@settings(max_examples=100, deadline=None)
@given(params_st)
def test_fpen_knots_are_smooth(kp):
    p = PenaltyParams(*kp)
    scale = p.k * p.eps ** 2
    tiny = np.nextafter(0.0, 1.0)
    below, above = f_pen(-0.0, p), f_pen(tiny, p)
    assert abs(below[0] - above[0]) <= 1e-12 * scale
    assert abs(below[1] - above[1]) <= 1e-12 * scale
    at, past = f_pen(p.eps, p), f_pen(np.nextafter(p.eps, 1.0), p)
    assert abs(at[0] - past[0]) <= 1e-12 * scale
    assert abs(at[1] - past[1]) <= 1e-12 * scale
    # second derivative k * (1 - x/eps) vanishes at eps
    h = 1e-6 * p.eps
    d2 = (f_pen(p.eps, p)[1] - f_pen(p.eps - h, p)[1]) / h
    assert abs(d2) <= 1e-4 * p.k


def test_fpen_vectorized_matches_scalar():
    xs = np.linspace(-0.3, 0.3, 31)
    val, der = f_pen(xs)
    for x, v, d in zip(xs, val, der):
        assert (v, d) == f_pen(float(x))


def test_penalty_params_validated():
    with pytest.raises(ValueError):
        PenaltyParams(k=0)
    with pytest.raises(ValueError):
        PenaltyParams(eps=-1)


def test_ee_zero_at_goal(tripod):
    X = end_effector_pose(tripod.topology, tripod.st0)
    val, g_st, g_dp = objective_ee(tripod.topology, tripod.st0, EndEffectorGoal(X))
    assert val == 0.0 and not g_st.any() and not g_dp.any()


def test_ee_position_offset_value(tripod):
    X = end_effector_pose(tripod.topology, tripod.st0)
    val, _, _ = objective_ee(tripod.topology, tripod.st0, EndEffectorGoal(X + np.r_[0.3, 0, 0, 0, 0, 0]))
    assert val == pytest.approx(0.045, rel=1e-12)


@pytest.mark.parametrize("name", ["gradcheck_single", "fig1b"])
def test_ee_gradients_match_finite_differences(name):
    sc = shipped(name)
    rng = np.random.default_rng(0)
    state = sc.st0 + 0.1 * rng.standard_normal(sc.st0.size)
    dp = 0.1 * rng.standard_normal(sc.topology.n_dp)
    goal = sc.objective.goal
    _, g_st, g_dp = objective_ee(sc.topology, state, goal, dp)
    assert np.allclose(g_st, central_diff(lambda s: objective_ee(sc.topology, s, goal, dp)[0], state), atol=1e-7)
    assert np.allclose(g_dp, central_diff(lambda d: objective_ee(sc.topology, state, goal, d)[0], dp), atol=1e-7)


def test_ica_zero_when_far_apart(tripod):
    ms = np.tile(tripod.m0, (5, 1))
    val, grad = objective_ica(ms, 3, lim=1.0)
    assert val == 0.0 and not grad.any()


def test_ica_pair_at_limit():
    p = PenaltyParams()
    ms = np.tile([0.0, 0.0, 0.0, 0.5, 2.0, 0.0], (7, 1))
    val, _ = objective_ica(ms, 2, lim=2.0, params=p)
    assert val == pytest.approx(7 * p.k * p.eps ** 2 / 6, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_ica_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    ms = rng.uniform(-1, 1, (4, 9))
    val, grad = objective_ica(ms, 3, lim=1.2)
    num = central_diff(lambda x: objective_ica(x.reshape(ms.shape), 3, lim=1.2)[0], ms.ravel())
    assert val >= 0
    assert np.allclose(grad.ravel(), num, rtol=1e-6, atol=1e-6 * max(1.0, np.abs(num).max()))


def test_base_pair_distances():
    d, pairs = base_pair_distances(np.array([[0, 0, 0, 1.0, 3, 4, 0, 0, 1]]), 3)
    assert pairs == [(0, 1), (0, 2), (1, 2)]
    assert np.allclose(d, [[5, 1, np.hypot(3, 3)]])


def rod():
    body = BodyDef("rod", [DesignPoint("a", (0, 0, 0)), DesignPoint("b", (1, 0, 0), True)])
    return RobotTopology([body], [], [MobileBaseSpec(0, ride_height=0.0)], EndEffector(0))


def test_sphere_spacing_and_count():
    dec = decompose_spheres(rod(), 0.25)
    assert dec.n_s >= 4
    centers = dec.centers_local(rod())
    assert np.all(np.linalg.norm(np.diff(centers, axis=0), axis=1) <= 0.25 + 1e-12)


def test_single_point_body_gets_one_sphere():
    body = BodyDef("dot", [DesignPoint("p", (0, 0, 0))])
    topo = RobotTopology([body], [], [MobileBaseSpec(0, ride_height=0.0)], EndEffector(0))
    assert decompose_spheres(topo, 0.1).n_s == 1


def test_zero_length_segment_gets_one_sphere():
    body = BodyDef("dot", [DesignPoint("p", (1, 0, 0)), DesignPoint("q", (1, 0, 0))])
    topo = RobotTopology([body], [], [MobileBaseSpec(0, ride_height=0.0)], EndEffector(0))
    assert decompose_spheres(topo, 0.1).n_s == 1


@pytest.mark.parametrize("name", ["fig2a", "fig1b", "gradcheck_chain"])
def test_spheres_cover_every_point(name):
    topo = shipped(name).topology
    dec = decompose_spheres(topo, 0.15)
    centers = dec.centers_local(topo)
    for b, body in enumerate(topo.bodies):
        own = centers[[i for i, s in enumerate(dec.spheres) if s.body == b]]
        for p in body.points:
            assert np.min(np.linalg.norm(own - np.asarray(p.p0_local), axis=1)) <= 0.15


def test_sphere_centers_follow_design():
    topo = rod()
    dec = decompose_spheres(topo, 0.25)
    moved = dec.centers_local(topo, np.array([0.5]))
    assert moved[-1] == pytest.approx([1.5, 0, 0])
    num = central_diff(lambda d: dec.centers_local(topo, d), np.array([0.2]))
    assert np.allclose(dec.center_design_jacobians(topo), num, atol=1e-9)


def test_eoa_far_obstacle_is_zero(tripod):
    obs = ObstacleSet((Cylinder(100.0, 100.0, 0.5),))
    val, g_st, g_dp = objective_eoa(tripod.topology, tripod.st0[None], tripod.spheres, obs)
    assert val == 0.0 and not g_st.any() and not g_dp.any()


def test_eoa_touching_sphere_contributes_fpen_zero():
    topo = rod()
    dec = decompose_spheres(topo, 0.25)
    state = np.zeros(6)
    # cylinder axis at distance radius + r from the first sphere only
    obs = ObstacleSet((Cylinder(-0.45, 0.0, 0.2),))
    d = sphere_obstacle_distances(topo, state, dec, obs)
    assert d[0, 0, 0] == pytest.approx(0.0, abs=1e-15)
    assert np.all(d[0, 1:, 0] > 0.1)
    p = PenaltyParams()
    val, _, _ = objective_eoa(topo, state, dec, obs, p)
    assert val == pytest.approx(p.k * p.eps ** 2 / 6, rel=1e-9)


@pytest.mark.parametrize("name", ["gradcheck_single", "fig8"])
def test_eoa_gradients_match_finite_differences(name):
    sc = shipped(name)
    rng = np.random.default_rng(1)
    topo = sc.topology
    # put the obstacle right next to the end-effector body so several spheres are active
    X = end_effector_pose(topo, sc.st0)
    obs = ObstacleSet((Cylinder(X[0] + 0.25, X[1], 0.1),))
    states = sc.st0 + 0.02 * rng.standard_normal((2, sc.st0.size))
    dp = 0.05 * rng.standard_normal(topo.n_dp)
    p = PenaltyParams(k=10.0, eps=0.3)
    val, g_st, g_dp = objective_eoa(topo, states, sc.spheres, obs, p, dp)
    assert val > 0
    f = lambda s: objective_eoa(topo, s.reshape(states.shape), sc.spheres, obs, p, dp)[0]
    num = central_diff(f, states.ravel())
    assert np.allclose(g_st.ravel(), num, rtol=1e-6, atol=1e-6 * max(1.0, np.abs(num).max()))
    num_dp = central_diff(lambda d: objective_eoa(topo, states, sc.spheres, obs, p, d)[0], dp)
    assert np.allclose(g_dp, num_dp, rtol=1e-6, atol=1e-6 * max(1.0, np.abs(num_dp).max()))


def test_acc_zero_and_constant_controls():
    assert objective_acc(np.zeros((5, 3)), 0.1) == (0.0, pytest.approx(np.zeros((5, 3))))
    u = np.tile([1.0, -2.0, 0.5], (5, 1))
    val, _ = objective_acc(u, 0.1)
    assert val == pytest.approx(0.5 * np.sum((u[0] / 0.1) ** 2), rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.01, 1.0))
def test_acc_gradient_is_exact(seed, dt):
    u = np.random.default_rng(seed).standard_normal((6, 4))
    val, grad = objective_acc(u, dt)
    num = central_diff(lambda x: objective_acc(x.reshape(u.shape), dt)[0], u.ravel(), h=1e-4)
    assert val >= 0
    assert np.allclose(grad.ravel(), num, rtol=1e-8, atol=1e-8 * np.abs(num).max())


def test_acc_rejects_nonpositive_dt():
    with pytest.raises(ValueError):
        objective_acc(np.zeros((2, 2)), 0.0)


def test_objective_config_validation():
    with pytest.raises(ValueError, match="unknown task"):
        ObjectiveConfig(weights={"speed": 1.0})
    with pytest.raises(ValueError, match="non-negative"):
        ObjectiveConfig(weights={"ee": -1.0})
    cfg = ObjectiveConfig(weights={"ee": 1.0, "ica": 0.0})
    assert cfg.active("ee") and not cfg.active("ica") and not cfg.active("eoa")


def test_goal_and_cylinder_validation():
    with pytest.raises(ValueError):
        EndEffectorGoal((0, 0, 0))
    with pytest.raises(ValueError):
        Cylinder(0, 0, 0)
