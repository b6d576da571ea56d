"""Rigid-body poses and the Euler rotation chain.

A pose is ``(gamma, beta, alpha, T)`` with world rotation
``R = Rz(gamma) @ Ry(beta) @ Rx(alpha)``, so ``gamma`` is the heading about
the world z axis.  Gimbal lock at ``beta = +-pi/2`` is not handled.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels


@dataclass(frozen=True)
class BodyPose:
    gamma: float = 0.0
    beta: float = 0.0
    alpha: float = 0.0
    T: tuple = field(default=(0.0, 0.0, 0.0))

    def __post_init__(self):
        object.__setattr__(self, "T", tuple(float(t) for t in self.T))
        vals = (self.gamma, self.beta, self.alpha) + self.T
        if len(self.T) != 3 or not np.all(np.isfinite(vals)):
            raise ValueError(f"pose must be finite with a 3-vector T, got {vals}")

    @classmethod
    def from_array(cls, s):
        s = np.asarray(s, dtype=float)
        return cls(s[0], s[1], s[2], tuple(s[3:6]))

    def as_array(self):
        return np.array([self.gamma, self.beta, self.alpha, *self.T])

    @property
    def rotation(self):
        return rotation(self.gamma, self.beta, self.alpha)


class SystemState:
    """Poses of all ``n_b`` bodies at one trajectory index, flattened to ``6 n_b``."""

    def __init__(self, poses):
        self.poses = [p if isinstance(p, BodyPose) else BodyPose.from_array(p)
                      for p in poses]

    @classmethod
    def from_flat(cls, x):
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or x.size % 6:
            raise ValueError(f"flat state length must be a multiple of 6, got {x.shape}")
        return cls(x.reshape(-1, 6))

    @property
    def n_bodies(self):
        return len(self.poses)

    def flat(self):
        return np.concatenate([p.as_array() for p in self.poses]) if self.poses else np.zeros(0)

    def __len__(self):
        return 6 * len(self.poses)

    def __getitem__(self, i):
        return self.poses[i]


def _angles(pose):
    if isinstance(pose, BodyPose):
        return pose.gamma, pose.beta, pose.alpha, np.asarray(pose.T)
    s = np.asarray(pose, dtype=float)
    return s[0], s[1], s[2], s[3:6]


def rotation(gamma, beta, alpha):
    cg, sg = np.cos(gamma), np.sin(gamma)
    cb, sb = np.cos(beta), np.sin(beta)
    ca, sa = np.cos(alpha), np.sin(alpha)
    Rz = np.array([[cg, -sg, 0.0], [sg, cg, 0.0], [0.0, 0.0, 1.0]])
    Ry = np.array([[cb, 0.0, sb], [0.0, 1.0, 0.0], [-sb, 0.0, cb]])
    Rx = np.array([[1.0, 0.0, 0.0], [0.0, ca, -sa], [0.0, sa, ca]])
    return Rz @ Ry @ Rx


def to_world_point(pose, p_local):
    """Map a body-local point to world coordinates: ``R p + T``."""
    g, b, a, T = _angles(pose)
    return rotation(g, b, a) @ np.asarray(p_local, dtype=float) + T


def to_world_vector(pose, v_local):
    """Rotate a free vector into world coordinates (translation ignored)."""
    g, b, a, _ = _angles(pose)
    return rotation(g, b, a) @ np.asarray(v_local, dtype=float)


def rotation_partials(pose):
    """First and second partials of ``R`` with respect to ``(gamma, beta, alpha)``.

    Returns ``(dR, d2R)`` where ``dR`` has shape (3, 3, 3), indexed by angle,
    and ``d2R`` has shape (6, 3, 3) in the order gg, gb, ga, bb, ba, aa.
    Use :func:`second_partial` for ``(a, b)`` lookup.
    """
    g, b, a, _ = _angles(pose)
    _, dR, d2R = kernels.rotation_partials(float(g), float(b), float(a))
    return dR, d2R


def second_partial(d2R, a, b):
    return d2R[kernels.PAIR_INDEX[a, b]]
