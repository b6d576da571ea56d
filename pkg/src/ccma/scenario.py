"""Scenario files: YAML in, validated :class:`~ccma.trajopt.Scenario` out, and back.

Angles in files are degrees; everything in memory is radians.  The format is
described in ``docs/scenario_format.md``.
"""

import logging
import math
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .constraints import ConstraintSystem, relative_joint_angle
from .forward import SolverOptions, solve_state
from .objectives import (
    TASKS,
    Cylinder,
    EndEffectorGoal,
    ObjectiveConfig,
    ObstacleSet,
    PenaltyParams,
    end_effector_pose,
)
from .topology import (
    JOINT_KINDS,
    BodyDef,
    DesignPoint,
    EndEffector,
    JointSpec,
    MobileBaseSpec,
    RobotTopology,
    TopologyError,
)
from .trajopt import OptimizerOptions, Scenario

log = logging.getLogger(__name__)

DEFAULT_DT = 0.1
ASSEMBLY_TOL = 1e-16


class ScenarioError(ValueError):
    pass


def _where(path):
    return ".".join(str(p) for p in path)


def _require(d, key, path):
    if not isinstance(d, dict):
        raise ScenarioError(f"{_where(path)}: expected a mapping, got {type(d).__name__}")
    if key not in d:
        raise ScenarioError(f"{_where(path + [key])}: required field missing")
    return d[key]


def _number(v, path):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"{_where(path)}: expected a number, got {v!r}")
    if not math.isfinite(v):
        raise ScenarioError(f"{_where(path)}: value must be finite")
    return float(v)


def _vector(v, n, path):
    if not isinstance(v, (list, tuple)) or len(v) != n:
        raise ScenarioError(f"{_where(path)}: expected a list of {n} numbers, got {v!r}")
    return [_number(c, path + [i]) for i, c in enumerate(v)]


def _unit(v, path):
    a = np.array(_vector(v, 3, path))
    n = np.linalg.norm(a)
    if n == 0:
        raise ScenarioError(f"{_where(path)}: zero-length direction")
    return tuple(a / n)


def _parse_topology(doc):
    path = ["topology"]
    top = _require(doc, "topology", [])
    bodies_doc = _require(top, "bodies", path)
    if not isinstance(bodies_doc, list) or not bodies_doc:
        raise ScenarioError("topology.bodies: expected a non-empty list")
    bodies = []
    for i, b in enumerate(bodies_doc):
        bp = path + ["bodies", i]
        name = str(_require(b, "name", bp))
        pts = []
        for pname, spec in (b.get("points") or {}).items():
            pp = bp + ["points", pname]
            if isinstance(spec, dict):
                at = _vector(_require(spec, "at", pp), 3, pp + ["at"])
                opt = bool(spec.get("optimizable", False))
            else:
                at, opt = _vector(spec, 3, pp), False
            pts.append(DesignPoint(str(pname), tuple(at), opt))
        bodies.append(BodyDef(name, pts))
    index = {b.name: i for i, b in enumerate(bodies)}

    def body_ref(name, p):
        if name not in index:
            raise ScenarioError(f"{_where(p)}: unknown body {name!r}")
        return index[name]

    joints = []
    for i, j in enumerate(top.get("joints") or []):
        jp = path + ["joints", i]
        jname = str(_require(j, "name", jp))
        jp = path + ["joints", jname]
        kind = _require(j, "kind", jp)
        if kind not in JOINT_KINDS:
            raise ScenarioError(f"{_where(jp + ['kind'])}: unknown joint kind {kind!r}, expected one of {JOINT_KINDS}")
        bi = body_ref(_require(j, "body_i", jp), jp + ["body_i"])
        bk = body_ref(_require(j, "body_k", jp), jp + ["body_k"])
        refs = {}
        for side in ("ref_i", "ref_k"):
            if j.get(side) is not None:
                refs[side] = _unit(j[side], jp + [side])
        joints.append(JointSpec(
            jname, kind, bi, bk,
            str(_require(j, "anchor_i", jp)), str(_require(j, "anchor_k", jp)),
            _unit(_require(j, "axis_i", jp), jp + ["axis_i"]),
            _unit(_require(j, "axis_k", jp), jp + ["axis_k"]),
            refs.get("ref_i"), refs.get("ref_k")))
    bases = []
    for i, mb in enumerate(_require(top, "mobile_bases", path) or []):
        bp = path + ["mobile_bases", i]
        bases.append(MobileBaseSpec(
            body_ref(_require(mb, "body", bp), bp + ["body"]),
            _number(mb.get("footprint_radius", 0.3), bp + ["footprint_radius"]),
            None if mb.get("ride_height") is None else _number(mb["ride_height"], bp + ["ride_height"])))
    ee = _require(top, "end_effector", path)
    ee_spec = EndEffector(body_ref(_require(ee, "body", path + ["end_effector"]), path + ["end_effector", "body"]),
                          ee.get("point"))
    try:
        return RobotTopology(bodies, joints, bases, ee_spec)
    except TopologyError as exc:
        raise ScenarioError(f"topology: {exc}") from exc


def _pose_hint(h, path):
    ang = np.radians(_vector(h.get("angles", [0, 0, 0]), 3, path + ["angles"]))
    pos = _vector(_require(h, "position", path), 3, path + ["position"])
    return np.concatenate([ang, pos])


def _assemble(topo, sim, solver, dp):
    hints = _require(sim, "initial_poses", ["simulation"])
    st = np.empty(6 * topo.n_b)
    for i, b in enumerate(topo.bodies):
        p = ["simulation", "initial_poses", b.name]
        if b.name not in hints:
            raise ScenarioError(f"{_where(p)}: missing pose hint for body {b.name!r}")
        st[6 * i:6 * i + 6] = _pose_hint(hints[b.name], p)
    extra = set(hints) - {b.name for b in topo.bodies}
    if extra:
        raise ScenarioError(f"simulation.initial_poses: hints for unknown bodies {sorted(extra)}")
    m = []
    for mb in topo.mobile_bases:
        s = st[6 * mb.body:6 * mb.body + 6]
        m += [s[0], s[3], s[4]]
    for q in topo.actuated_joints:
        js = topo.joints[q]
        m.append(relative_joint_angle(js, st[6 * js.body_i:6 * js.body_i + 6], st[6 * js.body_k:6 * js.body_k + 6]))
    m = np.array(m)
    ride = np.array([st[6 * mb.body + 5] if mb.ride_height is None else mb.ride_height
                     for mb in topo.mobile_bases])
    system = ConstraintSystem(topo, dp, ride)
    res = solve_state(system, m, st, solver)
    tol = float(sim.get("assembly_tolerance", ASSEMBLY_TOL))
    if not res.residual_energy <= tol:
        raise ScenarioError(
            f"simulation.initial_poses: hints do not assemble (residual energy {res.residual_energy:.3e} > {tol:.1e})")
    return res.state, m, ride


def _parse_design(topo, opt, path):
    dp = topo.zero_design()
    for key, val in (opt.get("design") or {}).items():
        body, _, point = str(key).partition(".")
        try:
            idx = topo.dp_index(topo.body_index(body), point)
        except KeyError:
            idx = -1
        if idx < 0:
            raise ScenarioError(f"{_where(path + ['design', key])}: not an optimizable point (use body.point)")
        dp[idx] = _number(val, path + ["design", key])
    return dp


def _parse_goal(g, X0):
    path = ["objective", "goal"]
    if "offset" in g:
        v = np.array(_vector(g["offset"], 6, path + ["offset"]))
        return EndEffectorGoal(X0 + np.concatenate([v[:3], np.radians(v[3:])]))
    if "absolute" in g:
        v = np.array(_vector(g["absolute"], 6, path + ["absolute"]))
        return EndEffectorGoal(np.concatenate([v[:3], np.radians(v[3:])]))
    raise ScenarioError(f"{_where(path)}: give either 'offset' or 'absolute'")


def _parse_objective(doc, topo, X0):
    od = doc.get("objective") or {}
    path = ["objective"]
    weights = {}
    for kind, w in (od.get("weights") or ObjectiveConfig().weights).items():
        if kind not in TASKS:
            raise ScenarioError(f"{_where(path + ['weights', kind])}: unknown task, expected one of {TASKS}")
        weights[kind] = _number(w, path + ["weights", kind])
        if weights[kind] < 0:
            raise ScenarioError(f"{_where(path + ['weights', kind])}: weight must be non-negative")
    goal = _parse_goal(od["goal"], X0) if od.get("goal") is not None else EndEffectorGoal(X0)
    pen = od.get("penalty") or {}
    obstacles = []
    for i, c in enumerate(od.get("obstacles") or []):
        cp = path + ["obstacles", i]
        try:
            obstacles.append(Cylinder(*(_number(_require(c, k, cp), cp + [k]) for k in ("x", "y", "radius"))))
        except ValueError as exc:
            raise ScenarioError(f"{_where(cp)}: {exc}") from exc
    sph = od.get("spheres") or {}
    default_lim = 2.0 * max(mb.footprint_radius for mb in topo.mobile_bases)
    try:
        return ObjectiveConfig(
            weights=weights,
            lambda_E=_number(od.get("lambda_E", 1e3), path + ["lambda_E"]),
            goal=goal,
            ica_lim=_number(od.get("ica_lim", default_lim), path + ["ica_lim"]),
            obstacles=ObstacleSet(tuple(obstacles)),
            penalty=PenaltyParams(_number(pen.get("k", 1e4), path + ["penalty", "k"]),
                                  _number(pen.get("eps", 0.1), path + ["penalty", "eps"])),
            sphere_radius=_number(sph.get("radius", 0.15), path + ["spheres", "radius"]),
            sphere_bodies=tuple(sph["bodies"]) if sph.get("bodies") else None,
        )
    except ValueError as exc:
        raise ScenarioError(f"objective: {exc}") from exc


def _options(cls, d, path, allowed, other=()):
    kwargs = {}
    for key, val in (d or {}).items():
        if key in other:
            continue
        if key not in allowed:
            raise ScenarioError(f"{_where(path + [key])}: unknown option, expected one of {allowed + tuple(other)}")
        kwargs[key] = val
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{_where(path)}: {exc}") from exc


_SOLVER_KEYS = ("grad_tol", "max_iter", "mu0", "mu_grow", "mu_shrink", "mu_min", "mu_max", "hessian", "polish")
_OPT_KEYS = ("mode", "gtol", "ftol_rel", "max_iter", "memory", "c1", "max_halvings", "dp_trust", "initial_step")


def parse_scenario(doc, base_dir=None):
    """Build a :class:`Scenario` from an already-parsed YAML document."""
    if not isinstance(doc, dict):
        raise ScenarioError("scenario: top level must be a mapping")
    topo = _parse_topology(doc)
    sim = _require(doc, "simulation", [])
    n_t = int(_number(_require(sim, "n_t", ["simulation"]), ["simulation", "n_t"]))
    if n_t < 1:
        raise ScenarioError("simulation.n_t: must be at least 1")
    if "dt" in sim:
        dt = _number(sim["dt"], ["simulation", "dt"])
        if dt <= 0:
            raise ScenarioError("simulation.dt: must be positive")
    else:
        dt = DEFAULT_DT
        log.warning("simulation.dt not given; using the default of %g s", DEFAULT_DT)
    solver = _options(SolverOptions, sim.get("solver"), ["simulation", "solver"], _SOLVER_KEYS)
    opt_doc = doc.get("optimizer") or {}
    optimizer = _options(OptimizerOptions, opt_doc, ["optimizer"], _OPT_KEYS, ("design", "init_controls"))
    dp0 = _parse_design(topo, opt_doc, ["optimizer"])
    st0, m0, ride = _assemble(topo, sim, solver, dp0)
    X0 = end_effector_pose(topo, st0, dp0)
    objective = _parse_objective(doc, topo, X0)
    init = None
    if opt_doc.get("init_controls"):
        from .export import read_controls
        p = Path(opt_doc["init_controls"])
        if not p.is_absolute() and base_dir is not None:
            p = Path(base_dir) / p
        init = read_controls(p.read_text())
    sc = Scenario(topo, st0, m0, n_t, dt, objective, dp0, ride, solver, optimizer,
                  name=str(doc.get("name", "scenario")), description=str(doc.get("description", "")).strip(),
                  init_controls=init)
    if init is not None and init.shape != sc.control_shape:
        raise ScenarioError(f"optimizer.init_controls: shape {init.shape}, expected {sc.control_shape}")
    return sc


def load_scenario(text, base_dir=None):
    """Parse scenario YAML text; errors name the offending line or field."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}: " if mark is not None else ""
        raise ScenarioError(f"{where}{getattr(exc, 'problem', None) or exc}") from exc
    return parse_scenario(doc, base_dir)


def load_scenario_file(path):
    path = Path(path)
    return load_scenario(path.read_text(), base_dir=path.parent)


def shipped_scenarios():
    """Names of the scenarios bundled with the package."""
    root = resources.files("ccma") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


# short names for bundled scenarios
ALIASES = {"small": "gradcheck_single"}


def resolve_scenario(name_or_path):
    """A file path, or a bundled scenario name (``fig4`` or ``scenario_fig4``)."""
    p = Path(name_or_path)
    if p.is_file():
        return p
    name = p.stem if p.suffix == ".yaml" else str(name_or_path)
    if name.startswith("scenario_"):
        name = name[len("scenario_"):]
    name = ALIASES.get(name, name)
    candidate = resources.files("ccma") / "scenarios" / f"{name}.yaml"
    if candidate.is_file():
        return Path(str(candidate))
    raise ScenarioError(f"no scenario file or bundled scenario named {name_or_path!r}")


# ---- writing ----------------------------------------------------------------

class _Dumper(yaml.SafeDumper):
    pass


def _represent_list(dumper, data):
    flow = all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in data)
    return dumper.represent_sequence("tag:yaml.org,2002:seq", data, flow_style=flow)


_Dumper.add_representer(list, _represent_list)


def _r(x):
    """Shortest float repr that round-trips."""
    return float(repr(float(x))) if np.isfinite(x) else float(x)


def scenario_to_dict(sc):
    """Self-contained description of ``sc``; poses are the assembled state."""
    topo = sc.topology
    names = [b.name for b in topo.bodies]
    bodies = []
    for b in topo.bodies:
        pts = {}
        for p in b.points:
            at = [_r(c) for c in p.p0_local]
            pts[p.name] = {"at": at, "optimizable": True} if p.optimizable else at
        bodies.append({"name": b.name, "points": pts})
    joints = []
    for js in topo.joints:
        j = {"name": js.name, "kind": js.kind,
             "body_i": names[js.body_i], "anchor_i": js.anchor_i, "axis_i": [_r(c) for c in js.axis_i],
             "body_k": names[js.body_k], "anchor_k": js.anchor_k, "axis_k": [_r(c) for c in js.axis_k]}
        if js.ref_i is not None:
            j["ref_i"] = [_r(c) for c in js.ref_i]
        if js.ref_k is not None:
            j["ref_k"] = [_r(c) for c in js.ref_k]
        joints.append(j)
    bases = [{"body": names[mb.body], "footprint_radius": _r(mb.footprint_radius),
              "ride_height": _r(z)} for mb, z in zip(topo.mobile_bases, sc.ride_heights)]
    ee = {"body": names[topo.end_effector.body]}
    if topo.end_effector.point is not None:
        ee["point"] = topo.end_effector.point
    poses = {}
    for i, b in enumerate(topo.bodies):
        s = sc.st0[6 * i:6 * i + 6]
        poses[b.name] = {"angles": [_r(a) for a in np.degrees(s[:3])], "position": [_r(c) for c in s[3:]]}
    cfg = sc.objective
    goal = np.asarray(cfg.goal.target)
    objective = {
        "weights": {k: _r(v) for k, v in cfg.weights.items()},
        "lambda_E": _r(cfg.lambda_E),
        "goal": {"absolute": [_r(c) for c in goal[:3]] + [_r(a) for a in np.degrees(goal[3:])]},
        "ica_lim": _r(cfg.ica_lim),
        "penalty": {"k": _r(cfg.penalty.k), "eps": _r(cfg.penalty.eps)},
        "spheres": {"radius": _r(cfg.sphere_radius)},
    }
    if cfg.sphere_bodies:
        objective["spheres"]["bodies"] = list(cfg.sphere_bodies)
    if len(cfg.obstacles):
        objective["obstacles"] = [{"x": _r(c.x), "y": _r(c.y), "radius": _r(c.radius)} for c in cfg.obstacles.cylinders]
    solver = {k: getattr(sc.solver, k) for k in _SOLVER_KEYS}
    optimizer = {k: getattr(sc.optimizer, k) for k in _OPT_KEYS}
    design = {f"{names[b]}.{p}": _r(v) for (b, p), v in zip(topo.design_points, sc.dp0) if v != 0.0}
    if design:
        optimizer["design"] = design
    return {
        "name": sc.name,
        "description": sc.description,
        "topology": {"bodies": bodies, "joints": joints, "mobile_bases": bases, "end_effector": ee},
        "simulation": {"n_t": sc.n_t, "dt": _r(sc.dt), "solver": solver, "initial_poses": poses},
        "objective": objective,
        "optimizer": optimizer,
    }


def dump_yaml(doc):
    return yaml.dump(doc, Dumper=_Dumper, sort_keys=False, default_flow_style=False, width=100)


def dump_scenario(sc):
    """YAML text that loads back to an equivalent scenario (warm-start controls are not embedded)."""
    return dump_yaml(scenario_to_dict(sc))
