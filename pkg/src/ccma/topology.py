"""Declarative description of a robot: bodies, joints, mobile bases.

Everything here is immutable after construction; validation runs in
``RobotTopology.__post_init__`` and raises :class:`TopologyError` naming the
offending element.
"""

from dataclasses import dataclass, field

import numpy as np

PASSIVE = "passive_revolute"
ACTUATED = "actuated_revolute"
JOINT_KINDS = (PASSIVE, ACTUATED)

_UNIT_TOL = 1e-9


class TopologyError(ValueError):
    pass


def _vec3(v, what):
    t = tuple(float(c) for c in v)
    if len(t) != 3 or not np.all(np.isfinite(t)):
        raise TopologyError(f"{what}: expected a finite 3-vector, got {v!r}")
    return t


@dataclass(frozen=True)
class DesignPoint:
    """Attachment point in a body's local frame.

    ``p0_local`` is the point before any design change.  Optimizable points
    move radially (along ``p0_local / |p0_local|``) by their design parameter.
    """

    name: str
    p0_local: tuple
    optimizable: bool = False

    def __post_init__(self):
        object.__setattr__(self, "p0_local", _vec3(self.p0_local, f"point {self.name!r}"))


@dataclass(frozen=True)
class BodyDef:
    name: str
    points: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))

    def point(self, name):
        for p in self.points:
            if p.name == name:
                return p
        raise KeyError(name)

    def has_point(self, name):
        return any(p.name == name for p in self.points)


@dataclass(frozen=True)
class JointSpec:
    """Revolute joint between ``body_i`` and ``body_k``.

    Anchors are point names on the respective bodies.  ``ref_i``/``ref_k``
    are the unit reference directions (perpendicular to the axis) whose
    relative angle an actuated joint prescribes.
    """

    name: str
    kind: str
    body_i: int
    body_k: int
    anchor_i: str
    anchor_k: str
    axis_i: tuple
    axis_k: tuple
    ref_i: tuple = None
    ref_k: tuple = None

    def __post_init__(self):
        for attr in ("axis_i", "axis_k"):
            object.__setattr__(self, attr, _vec3(getattr(self, attr), f"joint {self.name!r} {attr}"))
        for attr in ("ref_i", "ref_k"):
            if getattr(self, attr) is not None:
                object.__setattr__(self, attr, _vec3(getattr(self, attr), f"joint {self.name!r} {attr}"))

    @property
    def actuated(self):
        return self.kind == ACTUATED


@dataclass(frozen=True)
class MobileBaseSpec:
    """Binds a body to a non-holonomic base.

    The body's local x axis is the driving direction, so the base heading is
    the body's ``gamma``.  ``ride_height`` (the planar constraint's z) defaults
    to the body's height in the initial state when None.
    """

    body: int
    footprint_radius: float = 0.3
    ride_height: float = None


@dataclass(frozen=True)
class EndEffector:
    """Body carrying the end-effector frame; ``point`` names its origin (None: body origin)."""

    body: int
    point: str = None


@dataclass(frozen=True)
class RobotTopology:
    bodies: tuple
    joints: tuple
    mobile_bases: tuple
    end_effector: EndEffector
    design_points: tuple = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "bodies", tuple(self.bodies))
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "mobile_bases", tuple(self.mobile_bases))
        object.__setattr__(self, "design_points", tuple(
            (b, p.name) for b, body in enumerate(self.bodies) for p in body.points if p.optimizable
        ))
        self.validate()

    @property
    def n_b(self):
        return len(self.bodies)

    @property
    def n_m(self):
        return len(self.mobile_bases)

    @property
    def actuated_joints(self):
        return tuple(j for j, js in enumerate(self.joints) if js.actuated)

    @property
    def n_a(self):
        return len(self.actuated_joints)

    @property
    def n_dp(self):
        return len(self.design_points)

    def body_index(self, name):
        for i, b in enumerate(self.bodies):
            if b.name == name:
                return i
        raise KeyError(name)

    def dp_index(self, body, point):
        try:
            return self.design_points.index((body, point))
        except ValueError:
            return -1

    def zero_design(self):
        return np.zeros(self.n_dp)

    def validate(self):
        if self.n_b < 1:
            raise TopologyError("topology needs at least one body")
        if self.n_m < 1:
            raise TopologyError("topology needs at least one mobile base")
        names = [b.name for b in self.bodies]
        if len(set(names)) != len(names):
            raise TopologyError(f"duplicate body names in {names}")
        for body in self.bodies:
            pnames = [p.name for p in body.points]
            if len(set(pnames)) != len(pnames):
                raise TopologyError(f"body {body.name!r}: duplicate point names")
            for p in body.points:
                if p.optimizable and np.linalg.norm(p.p0_local) == 0.0:
                    raise TopologyError(
                        f"body {body.name!r} point {p.name!r}: optimizable point at the body "
                        "origin has no radial direction")
        for js in self.joints:
            if js.kind not in JOINT_KINDS:
                raise TopologyError(f"joint {js.name!r}: unknown kind {js.kind!r}")
            for side, b in (("body_i", js.body_i), ("body_k", js.body_k)):
                if not 0 <= b < self.n_b:
                    raise TopologyError(f"joint {js.name!r}: {side} index {b} out of range")
            if js.body_i == js.body_k:
                raise TopologyError(f"joint {js.name!r}: connects body {js.body_i} to itself")
            for b, anchor in ((js.body_i, js.anchor_i), (js.body_k, js.anchor_k)):
                if not self.bodies[b].has_point(anchor):
                    raise TopologyError(
                        f"joint {js.name!r}: body {self.bodies[b].name!r} has no point {anchor!r}")
            for attr in ("axis_i", "axis_k"):
                if abs(np.linalg.norm(getattr(js, attr)) - 1.0) > _UNIT_TOL:
                    raise TopologyError(f"joint {js.name!r}: {attr} is not unit length")
            if js.actuated:
                if js.ref_i is None or js.ref_k is None:
                    raise TopologyError(f"joint {js.name!r}: actuated joint needs ref_i and ref_k")
            for ref, axis in (("ref_i", js.axis_i), ("ref_k", js.axis_k)):
                v = getattr(js, ref)
                if v is None:
                    continue
                if abs(np.linalg.norm(v) - 1.0) > _UNIT_TOL:
                    raise TopologyError(f"joint {js.name!r}: {ref} is not unit length")
                if abs(np.dot(v, axis)) > _UNIT_TOL:
                    raise TopologyError(f"joint {js.name!r}: {ref} is not perpendicular to its axis")
        seen = set()
        for q, mb in enumerate(self.mobile_bases):
            if not 0 <= mb.body < self.n_b:
                raise TopologyError(f"mobile base {q}: body index {mb.body} out of range")
            if mb.body in seen:
                raise TopologyError(f"mobile base {q}: body {self.bodies[mb.body].name!r} bound twice")
            if mb.footprint_radius < 0:
                raise TopologyError(f"mobile base {q}: negative footprint radius")
            seen.add(mb.body)
        ee = self.end_effector
        if ee is None or not 0 <= ee.body < self.n_b:
            raise TopologyError("end effector must reference an existing body")
        if ee.point is not None and not self.bodies[ee.body].has_point(ee.point):
            raise TopologyError(
                f"end effector: body {self.bodies[ee.body].name!r} has no point {ee.point!r}")
        return self

    def point_local(self, body, name, dp=None):
        """Effective local coordinates of a named point under design ``dp``."""
        if name is None:
            return np.zeros(3)
        p = self.bodies[body].point(name)
        idx = self.dp_index(body, name)
        value = 0.0 if dp is None or idx < 0 else float(dp[idx])
        return effective_point(p, value)

    def point_direction(self, body, name):
        """Radial unit direction of an optimizable point, zero vector otherwise."""
        if name is None or self.dp_index(body, name) < 0:
            return np.zeros(3)
        p0 = np.asarray(self.bodies[body].point(name).p0_local)
        return p0 / np.linalg.norm(p0)


def effective_point(point, dp_value):
    """Point position after a radial design offset: ``p0 + dp * p0/|p0|``."""
    p0 = np.asarray(point.p0_local, dtype=float)
    if dp_value == 0.0:
        return p0.copy()
    norm = np.linalg.norm(p0)
    if norm == 0.0:
        raise TopologyError(f"point {point.name!r} at the body origin cannot take a design offset")
    return p0 + dp_value * p0 / norm


@dataclass(frozen=True)
class CoordinateLayout:
    """Index assignment of the actuator pose ``m``, controls ``u`` and rates ``a``.

    Base ``k``: ``m[3k]`` heading, ``m[3k+1]`` x, ``m[3k+2]`` y;
    ``u[2k]`` linear speed, ``u[2k+1]`` angular speed.  Actuated joint ``q``
    sits at ``m[3 n_m + q]`` and ``u[2 n_m + q]``.  ``a`` follows ``m``.
    """

    n_m: int
    n_a: int

    @property
    def m_size(self):
        return 3 * self.n_m + self.n_a

    @property
    def u_size(self):
        return 2 * self.n_m + self.n_a

    a_size = m_size

    def heading(self, k):
        return 3 * k

    def position(self, k):
        return slice(3 * k + 1, 3 * k + 3)

    def joint_angle(self, q):
        return 3 * self.n_m + q

    def linear_speed(self, k):
        return 2 * k

    def angular_speed(self, k):
        return 2 * k + 1

    def joint_speed(self, q):
        return 2 * self.n_m + q


def coordinate_layout(topology):
    return CoordinateLayout(topology.n_m, topology.n_a)
