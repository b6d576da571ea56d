"""Implicit-function sensitivities of solved steps and their propagation in time.

At a solved step the stationarity condition ``g(st, m, dp) = J^T C = 0``
holds, so ``dst = -(dg/dst)^-1 (dg/dm dm + dg/ddp ddp)``.  The actuator pose
evolves by explicit Euler, which gives the forward recurrence for ``dm/du``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .forward import rates_jacobians


class SensitivityError(RuntimeError):
    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step


@dataclass
class StepSensitivities:
    dst_dm: np.ndarray          # d st_{j+1} / d m_{j+1}
    dst_da: np.ndarray          # d st_{j+1} / d a_j  (= dst_dm * dt)
    dst_ddp: np.ndarray         # d st_{j+1} / d dp  (local; st_{j+1} depends on dp only here)
    dE_dm: np.ndarray           # d E_rj / d m_{j+1} = C^T J_m
    dE_ddp: np.ndarray          # d E_rj / d dp = C^T J_dp
    hess_factor: tuple = field(repr=False, default=None)
    damping: float = 0.0


def _factor(H, step, max_tries=12):
    """Cholesky of ``H``; adds growing diagonal damping if it is not positive definite."""
    scale = max(float(np.abs(np.diag(H)).max(initial=0.0)), 1.0)
    mu = 0.0
    for _ in range(max_tries):
        try:
            return cho_factor(H + mu * np.eye(H.shape[0]), check_finite=False), mu
        except LinAlgError:
            mu = 1e-12 * scale if mu == 0.0 else mu * 100.0
    raise SensitivityError(f"state Hessian singular (damping {mu:.1e})", step=step)


def step_sensitivities(assembly, dt, exact=True, step=None):
    """Sensitivities of one solved step from its constraint assembly.

    With ``exact`` the residual-weighted second derivatives enter every
    block, matching the inner solver's exact-Hessian mode.
    """
    J, Jm, Jd, C = assembly.jac_state, assembly.jac_m, assembly.jac_dp, assembly.residual
    H = assembly.hessian(exact)
    g_m = J.T @ Jm
    g_d = J.T @ Jd
    if exact and assembly.hess_state_m is not None:
        g_m = g_m + assembly.hess_state_m
        g_d = g_d + assembly.hess_state_dp
    factor, mu = _factor(H, step)
    dst_dm = -cho_solve(factor, g_m, check_finite=False)
    dst_ddp = -cho_solve(factor, g_d, check_finite=False) if g_d.shape[1] else np.zeros((H.shape[0], 0))
    return StepSensitivities(
        dst_dm=dst_dm,
        dst_da=dst_dm * dt,
        dst_ddp=dst_ddp,
        dE_dm=Jm.T @ C,
        dE_ddp=Jd.T @ C,
        hess_factor=factor,
        damping=mu,
    )


@dataclass
class TrajectorySensitivities:
    dm_du: np.ndarray       # (n_t, n_t - 1, |m|, |u|); block [j, k] = dm_j/du_k
    dst_du: np.ndarray      # (n_t, n_t - 1, 6 n_b, |u|)
    dst_ddp: np.ndarray     # (n_t, 6 n_b, |dp|)
    dm_ddp: np.ndarray      # (n_t, |m|, |dp|), identically zero


def propagate(controls, ms, step_sens, dt, n_m):
    """Forward recurrence for ``dm_j/du_k`` and ``dst_j/du_k``.

    Seed ``dm_{k+1}/du_k = (da_k/du_k) dt``, then
    ``dm_{j+1}/du_k = (I + (da_j/dm_j) dt) dm_j/du_k``.  States follow from
    ``dst_j/du_k = (dst_j/dm_j) dm_j/du_k``.  Blocks with ``j <= k`` stay zero.
    """
    controls = np.atleast_2d(np.asarray(controls, dtype=float))
    n_steps, nu = controls.shape
    n_t = n_steps + 1
    nm = ms.shape[1]
    ns = step_sens[0].dst_dm.shape[0] if step_sens else 0
    dm_du = np.zeros((n_t, n_steps, nm, nu))
    dst_du = np.zeros((n_t, n_steps, ns, nu))
    eye = np.eye(nm)
    for j in range(n_steps):
        da_dm, da_du = rates_jacobians(controls[j], ms[j], n_m)
        # blocks for earlier controls pass through the Euler update
        if j > 0:
            dm_du[j + 1, :j] = np.einsum("ab,kbc->kac", eye + da_dm * dt, dm_du[j, :j])
        dm_du[j + 1, j] = da_du * dt
        dst_du[j + 1, :j + 1] = np.einsum("ab,kbc->kac", step_sens[j].dst_dm, dm_du[j + 1, :j + 1])
    n_dp = step_sens[0].dst_ddp.shape[1] if step_sens else 0
    return TrajectorySensitivities(
        dm_du=dm_du,
        dst_du=dst_du,
        dst_ddp=design_sensitivity_chain(step_sens, n_t, ns, n_dp),
        dm_ddp=np.zeros((n_t, nm, n_dp)),
    )


def design_sensitivity_chain(step_sens, n_t=None, n_state=None, n_dp=None):
    """Per-state total ``dst_j/ddp``.

    ``st_0`` is a fixed initial condition and each later state is the argmin
    for ``(m_j, dp)`` alone, so the local step term is already the total
    derivative.  ``m`` never depends on ``dp``.
    """
    if step_sens:
        n_state, n_dp = step_sens[0].dst_ddp.shape
    n_t = len(step_sens) + 1 if n_t is None else n_t
    out = np.zeros((n_t, n_state, n_dp))
    for j, s in enumerate(step_sens):
        out[j + 1] = s.dst_ddp
    return out


def residual_energy_gradients(step_sens, traj_sens):
    """``dEr_j/du_i`` with shape ``(n_t - 1, n_t - 1, |u|)`` and ``dEr_j/ddp`` ``(n_t - 1, |dp|)``.

    ``E_rj`` is evaluated at ``(st_{j+1}, m_{j+1})``; its state gradient
    vanishes at convergence, leaving ``C^T J_m dm_{j+1}/du_i`` and ``C^T J_dp``.
    """
    n_steps = len(step_sens)
    nu = traj_sens.dm_du.shape[-1]
    dE_du = np.zeros((n_steps, n_steps, nu))
    dE_ddp = np.zeros((n_steps, traj_sens.dst_ddp.shape[-1]))
    for j, s in enumerate(step_sens):
        dE_du[j, :j + 1] = np.einsum("a,kab->kb", s.dE_dm, traj_sens.dm_du[j + 1, :j + 1])
        dE_ddp[j] = s.dE_ddp
    return dE_du, dE_ddp


def trajectory_sensitivities(traj, exact=True):
    """Step sensitivities for every transition of a rolled-out trajectory, then propagate."""
    n_m = traj.system.topology.n_m
    steps = [step_sensitivities(s.assembly, traj.dt, exact, step=j) for j, s in enumerate(traj.steps)]
    return steps, propagate(traj.controls, traj.ms, steps, traj.dt, n_m)
