"""Delimited text tables: trajectories, controls and plot data."""

import csv
import io

import numpy as np

from .objectives import (
    base_pair_distances,
    end_effector_pose,
    f_pen,
    sphere_obstacle_distances,
)

POSE_COLUMNS = ("ee.x", "ee.y", "ee.z", "ee.gamma", "ee.beta", "ee.alpha")
TASK_COLUMNS = ("O_ee", "O_ica", "O_eoa")


def _fmt(x):
    # 17 significant digits round-trip doubles exactly
    return format(float(x), ".17g")


def m_columns(topology):
    names = [b.name for b in topology.bodies]
    cols = []
    for mb in topology.mobile_bases:
        n = names[mb.body]
        cols += [f"{n}.theta", f"{n}.x", f"{n}.y"]
    cols += [f"{topology.joints[q].name}.angle" for q in topology.actuated_joints]
    return cols


def u_columns(topology):
    names = [b.name for b in topology.bodies]
    cols = []
    for mb in topology.mobile_bases:
        n = names[mb.body]
        cols += [f"{n}.v", f"{n}.omega"]
    cols += [f"{topology.joints[q].name}.rate" for q in topology.actuated_joints]
    return cols


def trajectory_record(scenario, traj):
    """Per-state rows: index, time, m, X, E_r, per-state task values."""
    topo = scenario.topology
    cfg = scenario.objective
    dp = traj.system.dp
    n_t = traj.n_t
    X = np.array([end_effector_pose(topo, s, dp) for s in traj.states])
    E = np.concatenate([[0.0], traj.residual_energies])
    goal = np.asarray(cfg.goal.target) if cfg.goal is not None else X[0]
    o_ee = 0.5 * np.sum((X - goal) ** 2, axis=1)
    if topo.n_m >= 2:
        d, _ = base_pair_distances(traj.ms, topo.n_m)
        o_ica = np.sum(f_pen(d - cfg.ica_lim, cfg.penalty)[0], axis=1)
    else:
        o_ica = np.zeros(n_t)
    if len(cfg.obstacles):
        dist = sphere_obstacle_distances(topo, traj.states, scenario.spheres, cfg.obstacles, dp)
        o_eoa = np.sum(f_pen(dist, cfg.penalty)[0].reshape(n_t, -1), axis=1)
    else:
        o_eoa = np.zeros(n_t)
    header = ["idx", "time", *m_columns(topo), *POSE_COLUMNS, "E_r", *TASK_COLUMNS]
    rows = np.column_stack([np.arange(n_t), np.arange(n_t) * traj.dt, traj.ms, X, E, o_ee, o_ica, o_eoa])
    return header, rows


def format_table(header, rows, int_columns=1):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([str(int(v)) for v in r[:int_columns]] + [_fmt(v) for v in r[int_columns:]])
    return buf.getvalue()


def export_trajectory(scenario, traj):
    """Header plus ``n_t`` rows with at least 12 significant digits."""
    return format_table(*trajectory_record(scenario, traj))


def read_table(text):
    """``(header, float array)`` from a table written by this module."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    rows = [[float(v) for v in r] for r in reader if r]
    return header, np.array(rows).reshape(len(rows), len(header))


def write_controls(topology, controls):
    controls = np.atleast_2d(controls)
    rows = np.column_stack([np.arange(controls.shape[0]), controls])
    return format_table(["step", *u_columns(topology)], rows)


def read_controls(text):
    _, data = read_table(text)
    return data[:, 1:]


def plot_tables(scenario, traj):
    """End-effector pose per state and base paths, as two plot-ready tables."""
    topo = scenario.topology
    dp = traj.system.dp
    ee_rows = [[j, j * traj.dt, *end_effector_pose(topo, s, dp)] for j, s in enumerate(traj.states)]
    ee = format_table(["idx", "time", *POSE_COLUMNS], ee_rows)
    names = [b.name for b in topo.bodies]
    base_rows = []
    for k, mb in enumerate(topo.mobile_bases):
        for j, m in enumerate(traj.ms):
            base_rows.append([k, j, m[3 * k + 1], m[3 * k + 2], m[3 * k]])
    header = ["base", "idx", "x", "y", "theta"]
    bases = format_table(header, base_rows, int_columns=2)
    legend = ", ".join(f"{k}={names[mb.body]}" for k, mb in enumerate(topo.mobile_bases))
    return ee, bases, legend



def design_columns(topology):
    return [f"{topology.bodies[b].name}.{name}" for b, name in topology.design_points]


def write_design(topology, dp):
    """One-row table of design offsets keyed ``body.point``."""
    return format_table(design_columns(topology), [np.asarray(dp, dtype=float)], int_columns=0)


def read_design(topology, text):
    header, data = read_table(text)
    expected = design_columns(topology)
    if header != expected or data.shape[0] != 1:
        raise ValueError(f"design table must have one row with columns {expected}, got {header}")
    return data[0]
