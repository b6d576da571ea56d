"""Constraint residuals ``C`` and their analytic derivatives.

Row blocks, in order: every revolute joint (5 rows: point coincidence then
two axis-orthogonality rows), planar base rows ``(z - z0, beta, alpha)``,
base actuator rows ``(gamma - theta, x - mx, y - my)``, rotary actuator rows
(3 each).
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .rigidbody import rotation, to_world_point, to_world_vector


class DimensionError(ValueError):
    pass


def orthonormal_complement(axis):
    """Two unit vectors completing ``axis`` to a right-handed orthonormal triad."""
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    helper = np.array([1.0, 0.0, 0.0]) if abs(a[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    n1 = np.cross(a, helper)
    n1 /= np.linalg.norm(n1)
    n2 = np.cross(a, n1)
    return n1, n2


def axis_angle(axis, theta):
    """Rotation matrix about unit ``axis`` by ``theta`` (Rodrigues)."""
    a = np.asarray(axis, dtype=float)
    K = np.array([[0.0, -a[2], a[1]], [a[2], 0.0, -a[0]], [-a[1], a[0], 0.0]])
    return np.eye(3) + np.sin(theta) * K + (1.0 - np.cos(theta)) * (K @ K)


def passive_revolute_residual(topology, joint, pose_i, pose_k, dp=None):
    js = topology.joints[joint] if isinstance(joint, (int, np.integer)) else joint
    p_i = topology.point_local(js.body_i, js.anchor_i, dp)
    p_k = topology.point_local(js.body_k, js.anchor_k, dp)
    n1, n2 = orthonormal_complement(js.axis_k)
    wa = to_world_vector(pose_i, js.axis_i)
    return np.concatenate([
        to_world_point(pose_i, p_i) - to_world_point(pose_k, p_k),
        [wa @ to_world_vector(pose_k, n1), wa @ to_world_vector(pose_k, n2)],
    ])


def planar_base_residual(pose, z0):
    s = np.asarray(pose.as_array() if hasattr(pose, "as_array") else pose, dtype=float)
    return np.array([s[5] - z0, s[1], s[2]])


def base_actuator_residual(pose, m_slice):
    s = np.asarray(pose.as_array() if hasattr(pose, "as_array") else pose, dtype=float)
    theta, x, y = m_slice
    return np.array([s[0] - theta, s[3] - x, s[4] - y])


def rotary_actuator_residual(pose_i, pose_k, joint, theta_ik):
    """``R_i (R_theta vp_i) - R_k vp_k`` with ``R_theta`` about ``axis_i`` in body i's frame."""
    w = axis_angle(joint.axis_i, theta_ik) @ np.asarray(joint.ref_i)
    return to_world_vector(pose_i, w) - to_world_vector(pose_k, joint.ref_k)


def relative_joint_angle(joint, pose_i, pose_k):
    """Angle ``theta`` that zeroes the rotary residual for the given poses (projected)."""
    s_i = np.asarray(pose_i.as_array() if hasattr(pose_i, "as_array") else pose_i, dtype=float)
    s_k = np.asarray(pose_k.as_array() if hasattr(pose_k, "as_array") else pose_k, dtype=float)
    Ri = rotation(*s_i[:3])
    Rk = rotation(*s_k[:3])
    target = Ri.T @ Rk @ np.asarray(joint.ref_k)
    a = np.asarray(joint.axis_i)
    v = np.asarray(joint.ref_i)
    return float(np.arctan2(np.cross(v, target) @ a, v @ target))


@dataclass
class ConstraintAssembly:
    residual: np.ndarray
    jac_state: np.ndarray
    jac_m: np.ndarray
    jac_dp: np.ndarray
    # sum_r C_r * second derivative of row r; None unless requested
    hess_state: np.ndarray = None
    hess_state_m: np.ndarray = None
    hess_state_dp: np.ndarray = None

    @property
    def energy(self):
        return 0.5 * float(self.residual @ self.residual)

    @property
    def gradient(self):
        return self.jac_state.T @ self.residual

    def hessian(self, exact=True):
        H = self.jac_state.T @ self.jac_state
        if exact and self.hess_state is not None:
            H = H + self.hess_state
        return H


class ConstraintSystem:
    """Constraint rows of a topology packed into flat arrays for the kernels.

    Rebuild (or call :meth:`with_design`) when the design parameters change;
    effective anchor positions are baked in.
    """

    def __init__(self, topology, dp=None, ride_heights=None):
        self.topology = topology
        dp = topology.zero_design() if dp is None else np.asarray(dp, dtype=float)
        if dp.shape != (topology.n_dp,):
            raise DimensionError(f"design vector has shape {dp.shape}, expected ({topology.n_dp},)")
        self.dp = dp
        joints = topology.joints
        nj = len(joints)
        self.jbi = np.array([j.body_i for j in joints], dtype=np.intp)
        self.jbk = np.array([j.body_k for j in joints], dtype=np.intp)
        self.pi = np.zeros((nj, 3))
        self.pk = np.zeros((nj, 3))
        self.ui = np.zeros((nj, 3))
        self.uk = np.zeros((nj, 3))
        self.di = np.full(nj, -1, dtype=np.intp)
        self.dk = np.full(nj, -1, dtype=np.intp)
        self.axi = np.zeros((nj, 3))
        self.n1k = np.zeros((nj, 3))
        self.n2k = np.zeros((nj, 3))
        self.vpi = np.zeros((nj, 3))
        self.vpk = np.zeros((nj, 3))
        for j, js in enumerate(joints):
            self.pi[j] = topology.point_local(js.body_i, js.anchor_i, dp)
            self.pk[j] = topology.point_local(js.body_k, js.anchor_k, dp)
            self.ui[j] = topology.point_direction(js.body_i, js.anchor_i)
            self.uk[j] = topology.point_direction(js.body_k, js.anchor_k)
            self.di[j] = topology.dp_index(js.body_i, js.anchor_i)
            self.dk[j] = topology.dp_index(js.body_k, js.anchor_k)
            self.axi[j] = js.axis_i
            self.n1k[j], self.n2k[j] = orthonormal_complement(js.axis_k)
            if js.actuated:
                self.vpi[j] = js.ref_i
                self.vpk[j] = js.ref_k
        self.bbody = np.array([mb.body for mb in topology.mobile_bases], dtype=np.intp)
        if ride_heights is None:
            ride_heights = [mb.ride_height for mb in topology.mobile_bases]
        if any(z is None for z in ride_heights):
            raise DimensionError("every mobile base needs a ride height")
        self.bz0 = np.asarray(ride_heights, dtype=float)
        self.aj = np.array(topology.actuated_joints, dtype=np.intp)

    def with_design(self, dp):
        return ConstraintSystem(self.topology, dp, self.bz0)

    @property
    def n_rows(self):
        return 5 * len(self.jbi) + 6 * len(self.bbody) + 3 * len(self.aj)

    @property
    def n_state(self):
        return 6 * self.topology.n_b

    @property
    def n_m(self):
        return 3 * len(self.bbody) + len(self.aj)

    def assemble(self, st, m, second=False):
        st = np.ascontiguousarray(st, dtype=float)
        m = np.ascontiguousarray(m, dtype=float)
        if st.shape != (self.n_state,):
            raise DimensionError(f"state has shape {st.shape}, expected ({self.n_state},)")
        if m.shape != (self.n_m,):
            raise DimensionError(f"actuator pose has shape {m.shape}, expected ({self.n_m},)")
        out = kernels.assemble(
            st, m, self.jbi, self.jbk, self.pi, self.pk, self.ui, self.uk, self.di, self.dk,
            self.axi, self.n1k, self.n2k, self.bbody, self.bz0, self.aj, self.vpi, self.vpk,
            len(self.dp), bool(second))
        return ConstraintAssembly(*out)

    def energy(self, st, m):
        return self.assemble(st, m).energy


def assemble(topology, st, m, dp=None, ride_heights=None, second=False):
    return ConstraintSystem(topology, dp, ride_heights).assemble(st, m, second=second)
