"""Regenerate the bundled scenario files from parametric mechanism builders.

All geometry here is chosen for this package (link lengths, base radius,
heights); none of it is tabulated elsewhere.  Run from the repository root:

    python3 tools/make_scenarios.py [--only NAME ...]

Scenarios whose warm start comes from a previous optimization (fig9) run
that optimization first, so a full regeneration takes about a minute.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from ccma.export import write_controls  # noqa: E402
from ccma.scenario import dump_yaml, parse_scenario  # noqa: E402
from ccma.trajopt import optimize  # noqa: E402

OUT = ROOT / "src" / "ccma" / "scenarios"

PASSIVE = "passive_revolute"
ACTUATED = "actuated_revolute"

# leg placement shared by the tripod mechanisms
BASE_RADIUS = 1.5
LEG_ANGLES = (90.0, 210.0, 330.0)
BASE_Z = 0.2
TURNTABLE_H = 0.1
ARM_H = 0.2
LINK_LENGTH = 1.5
EE_RADIUS = 0.4
WRIST_LENGTH = 0.3


def r(x):
    return float(round(float(x), 15))


def vec(v):
    return [r(c) for c in v]


def joint(name, kind, bi, ai, axi, bk, ak, axk, ref_i=None, ref_k=None):
    j = {"name": name, "kind": kind, "body_i": bi, "anchor_i": ai, "axis_i": vec(axi),
         "body_k": bk, "anchor_k": ak, "axis_k": vec(axk)}
    if ref_i is not None:
        j["ref_i"] = vec(ref_i)
        j["ref_k"] = vec(ref_k)
    return j


def pose(angles_deg, position):
    return {"angles": vec(angles_deg), "position": vec(position)}


def tripod(wrist=False, actuated=("shoulder", "elbow", "roll")):
    """Three bases, each carrying a turntable arm and an inclined link up to a shared platform.

    Without ``wrist`` the link top is hinged straight to the platform (4-DOF
    platform, all joints passive).  With ``wrist`` a short horizontal wrist
    sits between link and platform and the joints named in ``actuated``
    (any of shoulder, elbow, roll) become rotary actuators.
    """
    reach = EE_RADIUS + (WRIST_LENGTH if wrist else 0.0)
    elev = np.arccos((BASE_RADIUS - reach) / LINK_LENGTH)
    hinge_z = BASE_Z + TURNTABLE_H + ARM_H
    top_z = hinge_z + LINK_LENGTH * np.sin(elev)
    bodies, joints, bases, poses = [], [], [], {}
    ee_points = {}
    for k, phi_deg in enumerate(LEG_ANGLES):
        phi = np.radians(phi_deg)
        c, s = np.cos(phi), np.sin(phi)
        bx, by = BASE_RADIUS * c, BASE_RADIUS * s
        inward = phi_deg + 180.0
        bodies.append({"name": f"base{k}", "points": {"turntable": [0.0, 0.0, TURNTABLE_H]}})
        bodies.append({"name": f"arm{k}", "points": {"pivot": [0.0, 0.0, 0.0], "hinge": [0.0, 0.0, ARM_H]}})
        bodies.append({"name": f"link{k}", "points": {
            "lower": [0.0, 0.0, 0.0], "upper": {"at": [LINK_LENGTH, 0.0, 0.0], "optimizable": True}}})
        poses[f"base{k}"] = pose([0, 0, 0], [bx, by, BASE_Z])
        poses[f"arm{k}"] = pose([inward, 0, 0], [bx, by, BASE_Z + TURNTABLE_H])
        poses[f"link{k}"] = pose([inward, -np.degrees(elev), 0], [bx, by, hinge_z])
        ee_points[f"c{k}"] = vec([EE_RADIUS * c, EE_RADIUS * s, 0.0])
        tangent = (-s, c, 0.0)
        joints.append(joint(f"turn{k}", PASSIVE, f"base{k}", "turntable", (0, 0, 1),
                            f"arm{k}", "pivot", (0, 0, 1)))
        shoulder_kind = ACTUATED if wrist and "shoulder" in actuated else PASSIVE
        joints.append(joint(f"shoulder{k}", shoulder_kind, f"arm{k}", "hinge", (0, 1, 0),
                            f"link{k}", "lower", (0, 1, 0),
                            *(((1, 0, 0), (1, 0, 0)) if shoulder_kind == ACTUATED else ())))
        if wrist:
            bodies.append({"name": f"wrist{k}", "points": {
                "base": [0.0, 0.0, 0.0], "tip": [WRIST_LENGTH, 0.0, 0.0]}})
            ex, ey = (EE_RADIUS + WRIST_LENGTH) * c, (EE_RADIUS + WRIST_LENGTH) * s
            poses[f"wrist{k}"] = pose([inward, 0, 0], [ex, ey, top_z])
            elbow_kind = ACTUATED if "elbow" in actuated else PASSIVE
            joints.append(joint(f"elbow{k}", elbow_kind, f"link{k}", "upper", (0, 1, 0),
                                f"wrist{k}", "base", (0, 1, 0),
                                *(((1, 0, 0), (1, 0, 0)) if elbow_kind == ACTUATED else ())))
            roll_kind = ACTUATED if "roll" in actuated else PASSIVE
            joints.append(joint(f"roll{k}", roll_kind, f"wrist{k}", "tip", (1, 0, 0),
                                "platform", f"c{k}", (c, s, 0.0),
                                *(((0, 0, 1), (0, 0, 1)) if roll_kind == ACTUATED else ())))
        else:
            joints.append(joint(f"elbow{k}", PASSIVE, f"link{k}", "upper", (0, 1, 0),
                                "platform", f"c{k}", tangent))
        bases.append({"body": f"base{k}", "footprint_radius": 0.3})
    ee_points["center"] = [0.0, 0.0, 0.0]
    bodies.append({"name": "platform", "points": ee_points})
    poses["platform"] = pose([0, 0, 0], [0, 0, top_z])
    topology = {"bodies": bodies, "joints": joints, "mobile_bases": bases,
                "end_effector": {"body": "platform", "point": "center"}}
    return topology, poses


def single_link():
    """One base with a link on an actuated turntable; the link tip is the end-effector."""
    topology = {
        "bodies": [
            {"name": "base0", "points": {"turntable": [0.0, 0.0, 0.1]}},
            {"name": "link", "points": {"pivot": [0.0, 0.0, 0.0],
                                        "tip": {"at": [1.0, 0.0, 0.3], "optimizable": True}}},
        ],
        "joints": [joint("yaw", ACTUATED, "base0", "turntable", (0, 0, 1), "link", "pivot", (0, 0, 1),
                         (1, 0, 0), (1, 0, 0))],
        "mobile_bases": [{"body": "base0", "footprint_radius": 0.3}],
        "end_effector": {"body": "link", "point": "tip"},
    }
    poses = {"base0": pose([0, 0, 0], [0, 0, 0.2]), "link": pose([30, 0, 0], [0, 0, 0.3])}
    return topology, poses


def two_base_chain():
    """Two bases joined by arm - bar - arm; the bar length is a design parameter."""
    topology = {
        "bodies": [
            {"name": "base0", "points": {"turntable": [0.0, 0.0, 0.1]}},
            {"name": "base1", "points": {"turntable": [0.0, 0.0, 0.1]}},
            {"name": "armL", "points": {"pivot": [0.0, 0.0, 0.0], "top": [0.0, 0.0, 0.5]}},
            {"name": "bar", "points": {"left": [0.0, 0.0, 0.0], "mid": [1.0, 0.0, 0.0],
                                       "right": {"at": [2.0, 0.0, 0.0], "optimizable": True}}},
            {"name": "armR", "points": {"pivot": [0.0, 0.0, 0.0], "top": [0.0, 0.0, 0.5]}},
        ],
        "joints": [
            joint("turnL", PASSIVE, "base0", "turntable", (0, 0, 1), "armL", "pivot", (0, 0, 1)),
            joint("hingeL", PASSIVE, "armL", "top", (0, 1, 0), "bar", "left", (0, 1, 0)),
            joint("hingeR", PASSIVE, "bar", "right", (0, 1, 0), "armR", "top", (0, 1, 0)),
            joint("turnR", PASSIVE, "armR", "pivot", (0, 0, 1), "base1", "turntable", (0, 0, 1)),
        ],
        "mobile_bases": [{"body": "base0", "footprint_radius": 0.3},
                         {"body": "base1", "footprint_radius": 0.3}],
        "end_effector": {"body": "bar", "point": "mid"},
    }
    poses = {
        "base0": pose([0, 0, 0], [-1.0, 0.0, 0.2]),
        "base1": pose([0, 0, 0], [1.0, 0.0, 0.2]),
        "armL": pose([0, 0, 0], [-1.0, 0.0, 0.3]),
        "bar": pose([0, 0, 0], [-1.0, 0.0, 0.8]),
        "armR": pose([0, 0, 0], [1.0, 0.0, 0.3]),
    }
    return topology, poses


def doc(name, description, topology, poses, n_t, objective, optimizer=None, dt=0.1):
    d = {"name": name, "description": description, "topology": topology,
         "simulation": {"n_t": n_t, "dt": dt, "initial_poses": poses}, "objective": objective}
    if optimizer:
        d["optimizer"] = optimizer
    return d


GEOMETRY_NOTE = "Geometry (link lengths, base radius, heights) is artifact-chosen."


def scenarios():
    tri4, poses4 = tripod(wrist=False)
    tri6, poses6 = tripod(wrist=True)
    out = {}
    out["fig2a"] = doc(
        "fig2a", "4-DOF platform on three bases, all joints passive. " + GEOMETRY_NOTE,
        tri4, poses4, 20,
        {"weights": {"ee": 1.0, "acc": 1e-6}, "goal": {"offset": [0.5, 0.5, 0.0, 30.0, 0.0, 0.0]}})
    out["fig1b"] = doc(
        "fig1b", "6-DOF platform on three bases, shoulder, elbow and wrist roll actuated on every leg. "
        + GEOMETRY_NOTE,
        tri6, poses6, 20,
        {"weights": {"ee": 1.0, "acc": 1e-6}, "goal": {"offset": [0.5, -0.5, 0.1, 20.0, 0.0, 0.0]}})
    out["fig4"] = doc(
        "fig4", "6-DOF platform: translate by (-3, 3, -0.5) m and turn 90 deg about z. " + GEOMETRY_NOTE,
        tri6, poses6, 20,
        {"weights": {"ee": 1.0, "acc": 1e-7}, "goal": {"offset": [-3.0, 3.0, -0.5, 90.0, 0.0, 0.0]}},
        {"max_iter": 1500})
    goal56 = {"offset": [-2.0, 2.0, 0.0, 90.0, 0.0, 0.0]}
    out["fig56"] = doc(
        "fig56", "4-DOF platform: translate by (-2, 2) m and turn 90 deg while keeping the bases "
        "at least ica_lim apart (ica_lim includes both footprints). " + GEOMETRY_NOTE,
        tri4, poses4, 20,
        {"weights": {"ee": 1.0, "ica": 1.0, "acc": 1e-6}, "ica_lim": 2.0, "goal": goal56})
    # base0 drives along y = 1.5 when unobstructed; the cylinder overlaps that lane
    out["fig8"] = doc(
        "fig8", "4-DOF platform: drive 2 m along x with a cylinder standing on the unconstrained "
        "path of one base. " + GEOMETRY_NOTE,
        tri4, poses4, 20,
        {"weights": {"ee": 1.0, "eoa": 1.0, "acc": 1e-6},
         "goal": {"offset": [2.0, 0.0, 0.0, 0.0, 0.0, 0.0]},
         "obstacles": [{"x": 1.0, "y": 1.6, "radius": 0.2}], "spheres": {"radius": 0.15}})
    out["fig9"] = doc(
        "fig9", "4-DOF platform asked to rise 1 m, beyond the reach of the nominal links; "
        "link lengths are optimized with the controls. " + GEOMETRY_NOTE,
        tri4, poses4, 20,
        {"weights": {"ee": 1.0, "acc": 1e-6}, "goal": {"offset": [0.0, 0.0, 1.0, 0.0, 0.0, 0.0]}},
        {"mode": "concurrent", "init_controls": "fig9_init.csv"})

    top, poses = single_link()
    out["gradcheck_single"] = doc(
        "gradcheck_single", "One base and one link on an actuated turntable; small enough for "
        "finite-difference gradient checks.", top, poses, 4,
        {"weights": {"ee": 1.0, "eoa": 1.0, "acc": 1e-3}, "goal": {"offset": [0.3, -0.2, 0.0, 15.0, 0.0, 0.0]},
         "obstacles": [{"x": 1.1, "y": 0.75, "radius": 0.1}], "spheres": {"radius": 0.15}},
        {"mode": "concurrent"})
    top, poses = two_base_chain()
    out["gradcheck_chain"] = doc(
        "gradcheck_chain", "Two bases joined by an arm-bar-arm chain; the bar length is a design "
        "parameter.", top, poses, 4,
        {"weights": {"ee": 1.0, "ica": 1.0, "eoa": 1.0, "acc": 1e-3}, "ica_lim": 1.95,
         "goal": {"offset": [0.2, 0.3, 0.0, 10.0, 0.0, 0.0]},
         "obstacles": [{"x": 0.0, "y": 0.3, "radius": 0.1}], "spheres": {"radius": 0.15}},
        {"mode": "concurrent"})
    top, poses = tripod(wrist=True, actuated=())
    # one rotary actuator on the first leg
    for j in top["joints"]:
        if j["name"] == "shoulder0":
            j["kind"] = ACTUATED
            j["ref_i"], j["ref_k"] = [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]
    out["gradcheck_6dof"] = doc(
        "gradcheck_6dof", "6-DOF tripod with a single actuated joint, short horizon. " + GEOMETRY_NOTE,
        top, poses, 3,
        {"weights": {"ee": 1.0, "ica": 1.0, "eoa": 1.0, "acc": 1e-3}, "ica_lim": 2.55,
         "goal": {"offset": [0.1, 0.1, 0.05, 5.0, 0.0, 0.0]},
         "obstacles": [{"x": 0.33, "y": 1.55, "radius": 0.1}], "spheres": {"radius": 0.15}},
        {"mode": "concurrent"})
    return out


def warm_start(name, d):
    """Best standalone controls for ``d``, used as the concurrent warm start."""
    sc = parse_scenario({**d, "optimizer": {"mode": "standalone"}})
    rep = optimize(sc)
    print(f"  {name} standalone: O_ee={rep.values['ee']:.4g} after {rep.iterations} iterations ({rep.reason})")
    return write_controls(sc.topology, rep.variable.u)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--only", nargs="*")
    args = ap.parse_args(argv)
    OUT.mkdir(parents=True, exist_ok=True)
    for name, d in scenarios().items():
        if args.only and name not in args.only:
            continue
        init = d.get("optimizer", {}).get("init_controls")
        if init:
            (OUT / init).write_text(warm_start(name, d))
        header = f"# {name}: generated by tools/make_scenarios.py; angles in degrees, lengths in meters.\n"
        text = header + dump_yaml(d)
        parse_scenario(d, base_dir=OUT)
        (OUT / f"{name}.yaml").write_text(text)
        print("wrote", name)


if __name__ == "__main__":
    main()
