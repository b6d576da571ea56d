"""Task objectives and their partial derivatives.

Every ``objective_*`` function returns the value and its partials with respect
to whatever it reads directly (states, actuator poses, controls, design).
Chaining through the simulation happens in :mod:`ccma.trajopt`.
"""

from dataclasses import dataclass, field

import numpy as np

from .rigidbody import rotation, rotation_partials

TASKS = ("ee", "ica", "eoa", "acc")


@dataclass(frozen=True)
class PenaltyParams:
    k: float = 1e4
    eps: float = 0.1

    def __post_init__(self):
        if not (self.k > 0 and self.eps > 0):
            raise ValueError(f"penalty needs k > 0 and eps > 0, got k={self.k}, eps={self.eps}")


def f_pen(x, params=PenaltyParams()):
    """Soft unilateral penalty and its derivative.

    Quadratic for ``x <= 0``, a cubic blend on ``(0, eps]`` and zero beyond
    ``eps``.  The value and first derivative are continuous at both knots and
    the second derivative is continuous at ``eps``.
    """
    x = np.asarray(x, dtype=float)
    k, e = params.k, params.eps
    # middle branch x^2/2 - e x/2 + e^2/6 - x^3/(6e) factors as (e - x)^3 / (6e)
    gap = np.clip(e - x, 0.0, None)
    val = np.where(x <= 0, x * x / 2 - e * x / 2 + e * e / 6, gap ** 3 / (6 * e)) * k
    der = np.where(x <= 0, x - e / 2, -gap * gap / (2 * e)) * k
    if val.ndim == 0:
        return float(val), float(der)
    return val, der


@dataclass(frozen=True)
class EndEffectorGoal:
    """Target ``(x, y, z, gamma, beta, alpha)`` of the end-effector frame."""

    target: tuple

    def __post_init__(self):
        t = tuple(float(v) for v in self.target)
        if len(t) != 6 or not np.all(np.isfinite(t)):
            raise ValueError(f"goal must be 6 finite numbers, got {self.target!r}")
        object.__setattr__(self, "target", t)


@dataclass(frozen=True)
class Cylinder:
    x: float
    y: float
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"cylinder radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class ObstacleSet:
    cylinders: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "cylinders", tuple(
            c if isinstance(c, Cylinder) else Cylinder(*c) for c in self.cylinders))

    def __len__(self):
        return len(self.cylinders)

    def as_array(self):
        return np.array([[c.x, c.y, c.radius] for c in self.cylinders]).reshape(-1, 3)


@dataclass(frozen=True)
class Sphere:
    """Sphere riding on ``body`` at ``(1 - t) * point_a + t * point_b`` (local frame).

    Storing the blend instead of a fixed center lets spheres follow design changes.
    """

    body: int
    point_a: str
    point_b: str
    t: float
    radius: float


@dataclass(frozen=True)
class SphereDecomposition:
    spheres: tuple = ()

    @property
    def n_s(self):
        return len(self.spheres)

    def centers_local(self, topology, dp=None):
        out = np.empty((self.n_s, 3))
        for i, s in enumerate(self.spheres):
            pa = topology.point_local(s.body, s.point_a, dp)
            pb = topology.point_local(s.body, s.point_b, dp)
            out[i] = (1.0 - s.t) * pa + s.t * pb
        return out

    def center_design_jacobians(self, topology):
        """``d center_local / d dp`` for every sphere, shape (n_s, 3, |dp|)."""
        out = np.zeros((self.n_s, 3, topology.n_dp))
        for i, s in enumerate(self.spheres):
            for w, name in ((1.0 - s.t, s.point_a), (s.t, s.point_b)):
                idx = topology.dp_index(s.body, name)
                if idx >= 0:
                    out[i, :, idx] += w * topology.point_direction(s.body, name)
        return out


def decompose_spheres(topology, r, bodies=None):
    """Cover each body's point polyline with overlapping spheres of radius ``r``.

    Points are visited in declaration order; each segment of length ``L``
    gets ``ceil(L / r) + 1`` evenly spaced centers (shared endpoints once),
    so consecutive centers are at most ``r`` apart.
    """
    if not r > 0:
        raise ValueError(f"sphere radius must be positive, got {r}")
    spheres = []
    for b, body in enumerate(topology.bodies):
        if bodies is not None and b not in bodies and body.name not in bodies:
            continue
        pts = body.points
        if not pts:
            continue
        if len(pts) == 1:
            spheres.append(Sphere(b, pts[0].name, pts[0].name, 0.0, r))
            continue
        for s, (pa, pb) in enumerate(zip(pts[:-1], pts[1:])):
            L = float(np.linalg.norm(np.subtract(pb.p0_local, pa.p0_local)))
            n = int(np.ceil(L / r)) + 1 if L > 0 else 1
            ts = np.linspace(0.0, 1.0, n) if n > 1 else np.array([0.0])
            for i, t in enumerate(ts):
                if s > 0 and i == 0:
                    continue
                spheres.append(Sphere(b, pa.name, pb.name, float(t), r))
    return SphereDecomposition(tuple(spheres))


@dataclass
class ObjectiveConfig:
    """Weights and data for the composite objective.

    ``weights`` maps task kind (``ee``, ``ica``, ``eoa``, ``acc``) to ``w_i``;
    a missing or zero weight disables the task.
    """

    weights: dict = field(default_factory=lambda: {"ee": 1.0, "ica": 1.0, "eoa": 1.0, "acc": 1e-3})
    lambda_E: float = 1e3
    goal: EndEffectorGoal = None
    ica_lim: float = 0.6
    obstacles: ObstacleSet = field(default_factory=ObstacleSet)
    penalty: PenaltyParams = field(default_factory=PenaltyParams)
    sphere_radius: float = 0.15
    sphere_bodies: tuple = None

    def __post_init__(self):
        for kind, w in self.weights.items():
            if kind not in TASKS:
                raise ValueError(f"unknown task {kind!r}; expected one of {TASKS}")
            if not w >= 0:
                raise ValueError(f"task {kind!r}: weight must be non-negative, got {w}")
        if not self.lambda_E > 0:
            raise ValueError("lambda_E must be positive")

    def weight(self, kind):
        return float(self.weights.get(kind, 0.0))

    def active(self, kind):
        return self.weight(kind) > 0


def end_effector_pose(topology, state, dp=None):
    """``X = (world position of the end-effector point, gamma, beta, alpha)``."""
    ee = topology.end_effector
    s = np.asarray(state, dtype=float)[6 * ee.body:6 * ee.body + 6]
    p = topology.point_local(ee.body, ee.point, dp)
    return np.concatenate([rotation(*s[:3]) @ p + s[3:], s[:3]])


def end_effector_jacobians(topology, state, dp=None):
    """``(dX/dst, dX/ddp)`` with shapes (6, 6 n_b) and (6, |dp|)."""
    ee = topology.end_effector
    s = np.asarray(state, dtype=float)[6 * ee.body:6 * ee.body + 6]
    p = topology.point_local(ee.body, ee.point, dp)
    dR, _ = rotation_partials(s)
    dX = np.zeros((6, len(state)))
    o = 6 * ee.body
    for q in range(3):
        dX[:3, o + q] = dR[q] @ p
        dX[3 + q, o + q] = 1.0
    dX[:3, o + 3:o + 6] = np.eye(3)
    dXd = np.zeros((6, topology.n_dp))
    idx = topology.dp_index(ee.body, ee.point) if ee.point is not None else -1
    if idx >= 0:
        dXd[:3, idx] = rotation(*s[:3]) @ topology.point_direction(ee.body, ee.point)
    return dX, dXd


def objective_ee(topology, final_state, goal, dp=None):
    """``1/2 |X - X*|^2`` at the final state, with partials w.r.t. that state and ``dp``."""
    X = end_effector_pose(topology, final_state, dp)
    r = X - np.asarray(goal.target if isinstance(goal, EndEffectorGoal) else goal)
    dX, dXd = end_effector_jacobians(topology, final_state, dp)
    return 0.5 * float(r @ r), dX.T @ r, dXd.T @ r


def base_pair_distances(ms, n_m):
    """Planar distances ``(n_t, n_pairs)`` between base centers, with the pair list."""
    ms = np.atleast_2d(ms)
    pairs = [(a, b) for a in range(n_m) for b in range(a + 1, n_m)]
    d = np.empty((ms.shape[0], len(pairs)))
    for p, (a, b) in enumerate(pairs):
        diff = ms[:, 3 * a + 1:3 * a + 3] - ms[:, 3 * b + 1:3 * b + 3]
        d[:, p] = np.hypot(diff[:, 0], diff[:, 1])
    return d, pairs


def objective_ica(ms, n_m, lim, params=PenaltyParams()):
    """Sum of ``f_pen(dist - lim)`` over states and base pairs; gradient w.r.t. every ``m_j``."""
    ms = np.atleast_2d(np.asarray(ms, dtype=float))
    grad = np.zeros_like(ms)
    total = 0.0
    for a in range(n_m):
        for b in range(a + 1, n_m):
            diff = ms[:, 3 * a + 1:3 * a + 3] - ms[:, 3 * b + 1:3 * b + 3]
            dist = np.hypot(diff[:, 0], diff[:, 1])
            val, der = f_pen(dist - lim, params)
            total += float(np.sum(val))
            unit = np.divide(diff, dist[:, None], out=np.zeros_like(diff), where=dist[:, None] > 0)
            g = der[:, None] * unit
            grad[:, 3 * a + 1:3 * a + 3] += g
            grad[:, 3 * b + 1:3 * b + 3] -= g
    return total, grad


def _sphere_groups(spheres):
    groups = {}
    for i, s in enumerate(spheres.spheres):
        groups.setdefault(s.body, []).append(i)
    return [(b, np.array(idx)) for b, idx in groups.items()]


def sphere_obstacle_distances(topology, states, spheres, obstacles, dp=None):
    """``dist_O`` for every (state, sphere, cylinder): shape (n_t, n_s, n_o)."""
    states = np.atleast_2d(states)
    cyl = obstacles.as_array()
    local = spheres.centers_local(topology, dp)
    radii = np.array([s.radius for s in spheres.spheres])
    out = np.empty((states.shape[0], spheres.n_s, len(cyl)))
    for j, st in enumerate(states):
        for b, idx in _sphere_groups(spheres):
            pose = st[6 * b:6 * b + 6]
            c = local[idx] @ rotation(*pose[:3]).T + pose[3:]
            rho = np.hypot(c[:, None, 0] - cyl[:, 0], c[:, None, 1] - cyl[:, 1])
            out[j, idx] = rho - cyl[:, 2] - radii[idx, None]
    return out


def objective_eoa(topology, states, spheres, obstacles, params=PenaltyParams(), dp=None):
    """Sum of ``f_pen(dist_O)``; partials w.r.t. every state and w.r.t. ``dp``."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    grad_st = np.zeros_like(states)
    grad_dp = np.zeros(topology.n_dp)
    if len(obstacles) == 0 or spheres.n_s == 0:
        return 0.0, grad_st, grad_dp
    cyl = obstacles.as_array()
    local = spheres.centers_local(topology, dp)
    dloc = spheres.center_design_jacobians(topology)
    radii = np.array([s.radius for s in spheres.spheres])
    groups = _sphere_groups(spheres)
    total = 0.0
    for j, st in enumerate(states):
        for b, idx in groups:
            o = 6 * b
            pose = st[o:o + 6]
            R = rotation(*pose[:3])
            c = local[idx] @ R.T + pose[3:]
            dx = c[:, None, 0] - cyl[:, 0]
            dy = c[:, None, 1] - cyl[:, 1]
            rho = np.hypot(dx, dy)
            val, der = f_pen(rho - cyl[:, 2] - radii[idx, None], params)
            total += float(np.sum(val))
            if not np.any(der):
                continue
            # gradient w.r.t. each world center; z plays no role
            safe = np.where(rho > 0, rho, 1.0)
            gc = np.zeros((len(idx), 3))
            gc[:, 0] = np.sum(der * dx / safe, axis=1)
            gc[:, 1] = np.sum(der * dy / safe, axis=1)
            dR, _ = rotation_partials(pose)
            for q in range(3):
                grad_st[j, o + q] += np.sum(gc * (local[idx] @ dR[q].T))
            grad_st[j, o + 3:o + 6] += gc.sum(axis=0)
            grad_dp += np.einsum("si,sid->d", gc @ R, dloc[idx])
    return total, grad_st, grad_dp


def objective_acc(controls, dt):
    """``1/2 |u_0/dt|^2 + sum 1/2 |(u_{i+1} - u_i)/dt|^2`` and its gradient."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    u = np.atleast_2d(np.asarray(controls, dtype=float))
    if u.shape[0] == 0:
        return 0.0, np.zeros_like(u)
    d = np.diff(u, axis=0, prepend=0.0) / dt
    val = 0.5 * float(np.sum(d * d))
    grad = d / dt
    grad[:-1] -= d[1:] / dt
    return val, grad
