"""Composite objective, its total gradient, and the L-BFGS outer loop.

The variable stacks all controls first, then (in concurrent mode) the
design parameters.  Gradients chain task partials through the forward
sensitivities of :mod:`ccma.sensitivity`.
"""

import logging
import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .constraints import ConstraintSystem, DimensionError
from .forward import SolverError, SolverOptions, rollout
from .objectives import (
    ObjectiveConfig,
    decompose_spheres,
    end_effector_pose,
    objective_acc,
    objective_ee,
    objective_eoa,
    objective_ica,
)
from .sensitivity import residual_energy_gradients, trajectory_sensitivities

log = logging.getLogger(__name__)

STANDALONE = "standalone"
CONCURRENT = "concurrent"


@dataclass
class OptimizerOptions:
    mode: str = STANDALONE
    gtol: float = 1e-6
    ftol_rel: float = 1e-10
    max_iter: int = 500
    memory: int = 10
    c1: float = 1e-4
    max_halvings: int = 40
    # largest |dp| change per outer iteration in concurrent mode
    dp_trust: float = 0.05
    # inf-norm of the first (steepest-descent) step
    initial_step: float = 0.1

    def __post_init__(self):
        if self.mode not in (STANDALONE, CONCURRENT):
            raise ValueError(f"unknown optimization mode {self.mode!r}")
        if self.memory < 1 or self.max_iter < 0:
            raise ValueError("memory must be >= 1 and max_iter >= 0")


@dataclass
class Scenario:
    """Everything needed to simulate and optimize one task."""

    topology: object
    st0: np.ndarray
    m0: np.ndarray
    n_t: int
    dt: float
    objective: ObjectiveConfig
    dp0: np.ndarray = None
    ride_heights: np.ndarray = None
    solver: SolverOptions = field(default_factory=SolverOptions)
    optimizer: OptimizerOptions = field(default_factory=OptimizerOptions)
    name: str = "scenario"
    description: str = ""
    # warm start for the optimizer, shape (n_t - 1, |u|)
    init_controls: np.ndarray = None

    def __post_init__(self):
        topo = self.topology
        self.st0 = np.asarray(self.st0, dtype=float)
        self.m0 = np.asarray(self.m0, dtype=float)
        self.dp0 = topo.zero_design() if self.dp0 is None else np.asarray(self.dp0, dtype=float)
        if self.st0.shape != (6 * topo.n_b,):
            raise DimensionError(f"st0 has shape {self.st0.shape}, expected ({6 * topo.n_b},)")
        if self.m0.shape != (3 * topo.n_m + topo.n_a,):
            raise DimensionError(f"m0 has shape {self.m0.shape}, expected ({3 * topo.n_m + topo.n_a},)")
        if self.dp0.shape != (topo.n_dp,):
            raise DimensionError(f"dp has shape {self.dp0.shape}, expected ({topo.n_dp},)")
        if self.n_t < 1:
            raise ValueError("n_t must be at least 1")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.ride_heights is None:
            self.ride_heights = np.array([self.st0[6 * mb.body + 5] for mb in topo.mobile_bases])
        self._spheres = None

    @property
    def n_u(self):
        return 2 * self.topology.n_m + self.topology.n_a

    @property
    def control_shape(self):
        return (self.n_t - 1, self.n_u)

    @property
    def spheres(self):
        if self._spheres is None:
            self._spheres = decompose_spheres(
                self.topology, self.objective.sphere_radius, self.objective.sphere_bodies)
        return self._spheres

    def system(self, dp=None):
        return ConstraintSystem(self.topology, self.dp0 if dp is None else dp, self.ride_heights)

    def zero_controls(self):
        return np.zeros(self.control_shape)

    def simulate(self, controls=None, dp=None):
        controls = self.zero_controls() if controls is None else np.asarray(controls, dtype=float)
        if controls.shape != self.control_shape:
            raise DimensionError(f"controls have shape {controls.shape}, expected {self.control_shape}")
        return rollout(self.system(dp), self.st0, self.m0, controls, self.dt, self.solver)


@dataclass
class OptVariable:
    u: np.ndarray
    dp: np.ndarray = None

    def flat(self):
        parts = [np.asarray(self.u, dtype=float).ravel()]
        if self.dp is not None:
            parts.append(np.asarray(self.dp, dtype=float))
        return np.concatenate(parts)

    @classmethod
    def from_flat(cls, x, control_shape, with_dp):
        n = control_shape[0] * control_shape[1]
        u = np.asarray(x[:n], dtype=float).reshape(control_shape)
        return cls(u, np.asarray(x[n:], dtype=float).copy() if with_dp else None)


@dataclass
class Evaluation:
    total: float
    breakdown: dict          # weighted task terms plus "residual"; sums to total
    values: dict             # unweighted task values
    residual_sum: float
    trajectory: object = field(repr=False)
    dp: np.ndarray = None


def total_objective(variable, scenario):
    """Run the rollout and evaluate ``sum w_i O_i + lambda_E sum E_rj``."""
    dp = scenario.dp0 if variable.dp is None else np.asarray(variable.dp, dtype=float)
    traj = scenario.simulate(variable.u, dp)
    cfg = scenario.objective
    topo = scenario.topology
    values = {}
    if cfg.active("ee"):
        values["ee"] = objective_ee(topo, traj.states[-1], cfg.goal, dp)[0]
    if cfg.active("ica") and topo.n_m >= 2:
        values["ica"] = objective_ica(traj.ms, topo.n_m, cfg.ica_lim, cfg.penalty)[0]
    if cfg.active("eoa"):
        values["eoa"] = objective_eoa(topo, traj.states, scenario.spheres, cfg.obstacles, cfg.penalty, dp)[0]
    if cfg.active("acc"):
        values["acc"] = objective_acc(traj.controls, scenario.dt)[0]
    breakdown = {k: cfg.weight(k) * v for k, v in values.items()}
    residual_sum = float(np.sum(traj.residual_energies))
    breakdown["residual"] = cfg.lambda_E * residual_sum
    total = float(sum(breakdown.values()))
    return Evaluation(total, breakdown, values, residual_sum, traj, dp)


def total_gradient(evaluation, scenario, with_dp=False):
    """Gradient of the composite objective at an evaluated point.

    Returns ``(dO/du, dO/ddp)``; the second is None unless ``with_dp``.
    """
    traj = evaluation.trajectory
    dp = evaluation.dp
    cfg = scenario.objective
    topo = scenario.topology
    n_t = traj.n_t
    g_st = np.zeros_like(traj.states)
    g_m = np.zeros_like(traj.ms)
    g_u = np.zeros_like(traj.controls)
    g_dp = np.zeros(topo.n_dp)
    if cfg.active("ee"):
        _, gs, gd = objective_ee(topo, traj.states[-1], cfg.goal, dp)
        g_st[-1] += cfg.weight("ee") * gs
        g_dp += cfg.weight("ee") * gd
    if cfg.active("ica") and topo.n_m >= 2:
        g_m += cfg.weight("ica") * objective_ica(traj.ms, topo.n_m, cfg.ica_lim, cfg.penalty)[1]
    if cfg.active("eoa"):
        _, gs, gd = objective_eoa(topo, traj.states, scenario.spheres, cfg.obstacles, cfg.penalty, dp)
        g_st += cfg.weight("eoa") * gs
        g_dp += cfg.weight("eoa") * gd
    if cfg.active("acc"):
        g_u += cfg.weight("acc") * objective_acc(traj.controls, scenario.dt)[1]
    if n_t > 1:
        steps, sens = trajectory_sensitivities(traj, exact=scenario.solver.exact)
        dE_du, dE_ddp = residual_energy_gradients(steps, sens)
        # st_0 and m_0 are fixed, so the j = 0 terms vanish
        g_u += np.einsum("js,jksu->ku", g_st[1:], sens.dst_du[1:])
        g_u += np.einsum("jm,jkmu->ku", g_m[1:], sens.dm_du[1:])
        g_u += cfg.lambda_E * dE_du.sum(axis=0)
        g_dp += np.einsum("js,jsd->d", g_st[1:], sens.dst_ddp[1:])
        g_dp += cfg.lambda_E * dE_ddp.sum(axis=0)
    return g_u, (g_dp if with_dp else None)


@dataclass
class OptReport:
    objective: float
    breakdown: dict
    values: dict
    residual_sum: float
    iterations: int
    reason: str
    variable: OptVariable
    trajectory: object = field(repr=False)
    grad_norm: float = float("nan")
    history: list = field(default_factory=list)
    mode: str = STANDALONE
    evaluations: int = 0

    def final_pose(self, scenario):
        return end_effector_pose(scenario.topology, self.trajectory.states[-1], self.trajectory.system.dp)


class _Problem:
    """Flat-vector view of a scenario for the optimizer, with a one-point cache."""

    def __init__(self, scenario, mode, dp_fixed):
        self.scenario = scenario
        self.with_dp = mode == CONCURRENT
        self.dp_fixed = dp_fixed
        self.shape = scenario.control_shape
        self.n_eval = 0

    def variable(self, x):
        var = OptVariable.from_flat(x, self.shape, self.with_dp)
        if not self.with_dp:
            var.dp = self.dp_fixed
        return var

    def evaluate(self, x):
        self.n_eval += 1
        return total_objective(self.variable(x), self.scenario)

    def gradient(self, ev):
        g_u, g_dp = total_gradient(ev, self.scenario, self.with_dp)
        return np.concatenate([g_u.ravel(), g_dp]) if self.with_dp else g_u.ravel()


def _two_loop(g, memory):
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(memory):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    if memory:
        s, y, _ = memory[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(memory, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return q


def optimize(scenario, mode=None, init=None, opts=None, callback=None):
    """L-BFGS over controls (and design parameters in concurrent mode).

    Returns the best iterate seen.  Rollouts whose inner solve breaks down
    count as infinite objective inside the line search.
    """
    opts = opts or scenario.optimizer
    mode = mode or opts.mode
    if mode not in (STANDALONE, CONCURRENT):
        raise ValueError(f"unknown optimization mode {mode!r}")
    init = init or OptVariable(scenario.zero_controls(), None)
    u0 = np.asarray(init.u, dtype=float).reshape(scenario.control_shape)
    dp_init = scenario.dp0 if init.dp is None else np.asarray(init.dp, dtype=float)
    if dp_init.shape != scenario.dp0.shape:
        raise DimensionError(f"design vector has shape {dp_init.shape}, expected {scenario.dp0.shape}")
    prob = _Problem(scenario, mode, dp_init)
    x = OptVariable(u0, dp_init if mode == CONCURRENT else None).flat()
    n_u = u0.size

    ev = prob.evaluate(x)
    f = ev.total
    g = prob.gradient(ev)
    memory = deque(maxlen=opts.memory)
    history = [f]
    reason = "max_iter"
    it = 0
    while True:
        gn = float(np.abs(g).max(initial=0.0))
        if callback is not None:
            callback(it, f, gn)
        if gn <= opts.gtol:
            reason = "gtol"
            break
        if it >= opts.max_iter:
            break
        d = -_two_loop(g, memory)
        slope = g @ d
        if not memory or slope >= 0:
            memory.clear()
            d = -g * (opts.initial_step / gn)
            slope = g @ d
        if mode == CONCURRENT and d.size > n_u:
            dmax = float(np.abs(d[n_u:]).max())
            if dmax > opts.dp_trust:
                d *= opts.dp_trust / dmax
                slope = g @ d
        t = 1.0
        accepted = None
        for _ in range(opts.max_halvings + 1):
            x_new = x + t * d
            try:
                ev_new = prob.evaluate(x_new)
                f_new = ev_new.total
            except SolverError as exc:
                log.debug("line search probe failed: %s", exc)
                f_new = np.inf
            if np.isfinite(f_new) and f_new <= f + opts.c1 * t * slope:
                accepted = ev_new
                break
            t *= 0.5
        if accepted is None:
            reason = "line_search_stalled"
            break
        it += 1
        g_new = prob.gradient(accepted)
        s, y = x_new - x, g_new - g
        sy = s @ y
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            memory.append((s, y, 1.0 / sy))
        decrease = f - f_new
        x, f, g, ev = x_new, f_new, g_new, accepted
        history.append(f)
        log.info("iter %d: f=%.6e |g|=%.3e step=%.3g", it, f, float(np.abs(g).max(initial=0.0)), t)
        if decrease <= opts.ftol_rel * max(abs(f), 1e-300):
            reason = "ftol"
            break

    var = prob.variable(x)
    if mode == STANDALONE:
        var.dp = dp_init
    return OptReport(
        objective=f,
        breakdown=ev.breakdown,
        values=ev.values,
        residual_sum=ev.residual_sum,
        iterations=it,
        reason=reason,
        variable=var,
        trajectory=ev.trajectory,
        grad_norm=float(np.abs(g).max(initial=0.0)),
        history=history,
        mode=mode,
        evaluations=prob.n_eval,
    )


@dataclass
class GradientCheck:
    analytic: np.ndarray
    numeric: np.ndarray
    h: float

    @property
    def abs_error(self):
        return np.abs(self.analytic - self.numeric)

    @property
    def rel_error(self):
        scale = np.maximum(np.abs(self.analytic), np.abs(self.numeric))
        return np.divide(self.abs_error, scale, out=np.zeros_like(scale), where=scale > 0)

    @property
    def max_rel(self):
        return float(self.rel_error.max(initial=0.0))

    @property
    def mean_rel(self):
        return float(self.rel_error.mean()) if self.rel_error.size else 0.0

    @property
    def worst(self):
        return int(np.argmax(self.abs_error - 1e-4 * np.maximum(np.abs(self.analytic), np.abs(self.numeric))))

    def passed(self, rtol=1e-4, atol=1e-7):
        scale = np.maximum(np.abs(self.analytic), np.abs(self.numeric))
        return bool(np.all(self.abs_error <= np.maximum(rtol * scale, atol)))

    def summary(self):
        if self.analytic.size == 0:
            return "no variables"
        w = self.worst
        return (f"{self.analytic.size} coords, max rel {self.max_rel:.3e}, mean rel {self.mean_rel:.3e}, "
                f"max abs {self.abs_error.max():.3e}, worst coord {w} "
                f"(analytic {self.analytic[w]:.9e}, fd {self.numeric[w]:.9e})")


def check_gradients(scenario, variable=None, h=1e-6, mode=None):
    """Central-difference check of :func:`total_gradient` at ``variable``."""
    if not h > 0:
        raise ValueError("finite-difference step h must be positive")
    mode = mode or scenario.optimizer.mode
    variable = variable or OptVariable(scenario.zero_controls(), None)
    dp = scenario.dp0 if variable.dp is None else np.asarray(variable.dp, dtype=float)
    prob = _Problem(scenario, mode, dp)
    x = OptVariable(variable.u, dp if mode == CONCURRENT else None).flat()
    if x.size > 200:
        warnings.warn(f"gradient check over {x.size} variables needs {2 * x.size} rollouts", stacklevel=2)
    analytic = prob.gradient(prob.evaluate(x))
    numeric = np.empty_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        numeric[i] = (prob.evaluate(xp).total - prob.evaluate(xm).total) / (2 * h)
    return GradientCheck(analytic, numeric, h)
