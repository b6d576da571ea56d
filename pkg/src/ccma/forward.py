"""Forward simulation: controls -> actuator rates -> Euler step -> state solve."""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .constraints import ConstraintAssembly, ConstraintSystem, DimensionError

log = logging.getLogger(__name__)

# relative energy change treated as rounding noise near a minimum
ROUNDING = 1e-12


class SolverError(RuntimeError):
    """Inner solve broke down (normal system singular even with maximal damping)."""

    def __init__(self, message, step=None, damping=None):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step
        self.damping = damping


@dataclass
class SolverOptions:
    grad_tol: float = 1e-10
    max_iter: int = 100
    mu0: float = 1e-6
    mu_grow: float = 10.0
    mu_shrink: float = 2.0
    mu_min: float = 1e-12
    mu_max: float = 1e10
    # "exact" adds the residual-weighted second derivatives to J^T J
    hessian: str = "exact"
    # extra Newton steps after convergence, taken only while they keep improving
    polish: int = 2

    def __post_init__(self):
        if self.hessian not in ("exact", "gauss_newton"):
            raise ValueError(f"unknown hessian mode {self.hessian!r}")

    @property
    def exact(self):
        return self.hessian == "exact"


@dataclass
class StepResult:
    state: np.ndarray
    m_next: np.ndarray
    residual_energy: float
    converged: bool
    iterations: int
    assembly: ConstraintAssembly = field(repr=False, default=None)

    @property
    def grad_norm(self):
        return float(np.abs(self.assembly.gradient).max(initial=0.0))


@dataclass
class Trajectory:
    states: np.ndarray      # (n_t, 6 n_b)
    ms: np.ndarray          # (n_t, |m|)
    controls: np.ndarray    # (n_t - 1, |u|)
    rates: np.ndarray       # (n_t - 1, |m|)
    steps: list             # StepResult per transition, len n_t - 1
    dt: float
    system: ConstraintSystem = field(repr=False, default=None)

    @property
    def n_t(self):
        return self.states.shape[0]

    @property
    def residual_energies(self):
        return np.array([s.residual_energy for s in self.steps])

    @property
    def converged(self):
        return all(s.converged for s in self.steps)


def _base_count(n_m):
    return n_m.n_m if hasattr(n_m, "n_m") else int(n_m)


def control_to_rates(u, m, n_m):
    """World-frame actuator rates from base speeds and joint speeds.

    Translation follows the current heading, so bases never slide sideways.
    ``n_m`` may also be a :class:`CoordinateLayout`.
    """
    n_m = _base_count(n_m)
    u = np.asarray(u, dtype=float)
    m = np.asarray(m, dtype=float)
    if u.size != m.size - n_m:
        raise DimensionError(f"control length {u.size} does not match actuator pose length {m.size}")
    a = np.empty_like(m)
    theta = m[0:3 * n_m:3]
    v = u[0:2 * n_m:2]
    a[0:3 * n_m:3] = u[1:2 * n_m:2]
    a[1:3 * n_m:3] = v * np.cos(theta)
    a[2:3 * n_m:3] = v * np.sin(theta)
    a[3 * n_m:] = u[2 * n_m:]
    return a


def rates_jacobians(u, m, n_m):
    """``(da/dm, da/du)`` of :func:`control_to_rates`."""
    n_m = _base_count(n_m)
    u = np.asarray(u, dtype=float)
    m = np.asarray(m, dtype=float)
    nm, nu = m.size, u.size
    da_dm = np.zeros((nm, nm))
    da_du = np.zeros((nm, nu))
    for k in range(n_m):
        th, v = m[3 * k], u[2 * k]
        c, s = np.cos(th), np.sin(th)
        da_dm[3 * k + 1, 3 * k] = -v * s
        da_dm[3 * k + 2, 3 * k] = v * c
        da_du[3 * k, 2 * k + 1] = 1.0
        da_du[3 * k + 1, 2 * k] = c
        da_du[3 * k + 2, 2 * k] = s
    for q in range(nm - 3 * n_m):
        da_du[3 * n_m + q, 2 * n_m + q] = 1.0
    return da_dm, da_du


def integrate(m, a, dt):
    """Explicit Euler update of the actuator pose."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    return np.asarray(m, dtype=float) + np.asarray(a, dtype=float) * dt


def _inf(g):
    return float(np.abs(g).max(initial=0.0))


def _accept(asm_new, E, gn):
    """Energy decrease, or a rounding-level increase while the gradient still shrinks."""
    E_new = asm_new.energy
    if E_new <= E:
        return True
    return E_new <= E * (1.0 + ROUNDING) + 1e-32 and _inf(asm_new.gradient) < gn


def solve_state(system, m_next, st_init, opts=None, step=None):
    """Minimize ``E = 1/2 |C|^2`` over the state with damped Newton steps.

    Warm-started from ``st_init``.  Steps solve ``(H + mu I) dx = -g`` with
    ``H`` either ``J^T J`` or the exact Hessian; a step is accepted only if
    the energy does not increase beyond rounding (relative ``ROUNDING``), so
    ``E`` is monotone over accepted steps.
    """
    opts = opts or SolverOptions()
    second = opts.exact
    m_next = np.asarray(m_next, dtype=float)
    x = np.array(st_init, dtype=float)
    if not (np.all(np.isfinite(m_next)) and np.all(np.isfinite(x))):
        raise SolverError("non-finite actuator target or start state", step=step)
    asm = system.assemble(x, m_next, second=second)
    E = asm.energy
    g = asm.gradient
    gn = _inf(g)
    mu = opts.mu0
    it = 0
    eye = np.eye(x.size)

    def newton_step(asm, g, mu):
        H = asm.hessian(second)
        while True:
            try:
                factor = cho_factor(H + mu * eye, check_finite=False)
                dx = -cho_solve(factor, g, check_finite=False)
                if np.all(np.isfinite(dx)):
                    return dx, mu
            except LinAlgError:
                pass
            mu *= opts.mu_grow
            if mu > opts.mu_max:
                raise SolverError("normal system singular", step=step, damping=mu)

    stalled = False
    while gn > opts.grad_tol and it < opts.max_iter:
        while True:
            dx, mu = newton_step(asm, g, mu)
            x_new = x + dx
            asm_new = system.assemble(x_new, m_next, second=second)
            if _accept(asm_new, E, gn):
                break
            mu *= opts.mu_grow
            if mu > opts.mu_max:
                stalled = True
                break
        if stalled:
            log.debug("step %s: no decrease at damping %.1e, |g|=%.3e", step, mu, gn)
            break
        it += 1
        x, asm, E = x_new, asm_new, asm_new.energy
        g = asm.gradient
        gn = _inf(g)
        mu = max(mu / opts.mu_shrink, opts.mu_min)

    converged = gn <= opts.grad_tol
    if converged and it > 0:
        for _ in range(opts.polish):
            if gn < 1e-15:
                break
            try:
                dx, _ = newton_step(asm, g, opts.mu_min)
            except SolverError:
                break
            asm_new = system.assemble(x + dx, m_next, second=second)
            gnew = _inf(asm_new.gradient)
            if not (_accept(asm_new, E, gn) and gnew < gn):
                break
            x, asm, E, g, gn = x + dx, asm_new, asm_new.energy, asm_new.gradient, gnew
            it += 1
    if not converged:
        log.debug("step %s: not converged after %d iterations, |g|=%.3e", step, it, gn)
    return StepResult(x, m_next, E, converged, it, asm)


def rollout(system, st0, m0, controls, dt, opts=None):
    """Apply ``controls`` (shape ``(n_t - 1, |u|)``) from ``(st0, m0)``.

    Returns a :class:`Trajectory` with all ``n_t`` states.  Solver breakdowns
    are re-raised with the failing step index.
    """
    opts = opts or SolverOptions()
    n_m = system.topology.n_m
    controls = np.atleast_2d(np.asarray(controls, dtype=float))
    if controls.shape[0] == 0:
        controls = controls.reshape(0, 2 * n_m + system.topology.n_a)
    n_steps = controls.shape[0]
    states = np.empty((n_steps + 1, system.n_state))
    ms = np.empty((n_steps + 1, system.n_m))
    rates = np.empty((n_steps, system.n_m))
    states[0] = st0
    ms[0] = m0
    steps = []
    for j in range(n_steps):
        a = control_to_rates(controls[j], ms[j], n_m)
        rates[j] = a
        ms[j + 1] = integrate(ms[j], a, dt)
        try:
            res = solve_state(system, ms[j + 1], states[j], opts, step=j)
        except SolverError as exc:
            raise SolverError(str(exc).split(": ", 1)[-1], step=j, damping=exc.damping) from exc
        states[j + 1] = res.state
        steps.append(res)
    return Trajectory(states, ms, controls, rates, steps, dt, system)
