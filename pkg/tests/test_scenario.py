import logging
import time

import numpy as np
import pytest
import yaml

from ccma.export import write_controls
from ccma.scenario import (
    ScenarioError,
    dump_scenario,
    load_scenario,
    load_scenario_file,
    resolve_scenario,
    scenario_to_dict,
    shipped_scenarios,
)

from conftest import SINGLE_LINK, shipped

EXPECTED = {"fig2a", "fig1b", "fig4", "fig56", "fig8", "fig9",
            "gradcheck_single", "gradcheck_chain", "gradcheck_6dof"}


def test_minimal_single_base_loads():
    sc = load_scenario(SINGLE_LINK)
    assert sc.topology.n_m == 1 and sc.topology.n_a == 1
    assert sc.n_t == 4 and sc.dt == 0.1
    assert sc.m0[0] == 0.0 and sc.m0[3] == pytest.approx(np.radians(30.0))


def test_missing_dt_defaults_with_notice(caplog):
    text = SINGLE_LINK.replace("  dt: 0.1\n", "")
    with caplog.at_level(logging.WARNING, logger="ccma.scenario"):
        sc = load_scenario(text)
    assert sc.dt == 0.1
    assert any("dt" in r.getMessage() for r in caplog.records)


def test_joint_with_missing_body_names_both():
    text = SINGLE_LINK.replace("body_k: link", "body_k: ghost")
    with pytest.raises(ScenarioError) as exc:
        load_scenario(text)
    assert "yaw" in str(exc.value) and "ghost" in str(exc.value)


def test_yaml_syntax_error_reports_line():
    with pytest.raises(ScenarioError, match=r"line \d+"):
        load_scenario("name: x\ntopology: [1, 2\n")


@pytest.mark.parametrize("edit, message", [
    (("weights:", "weights: {speed: 1}\n  unused:"), "unknown task"),
    (("  n_t: 4", "  n_t: 0"), "n_t"),
    (("  dt: 0.1", "  dt: -0.1"), "dt"),
    (("    link: {angles: [30.0, 0.0, 0.0], position: [0.0, 0.0, 0.3]}", ""), "missing pose hint"),
    (("kind: actuated_revolute", "kind: welded"), "unknown joint kind"),
    (("  n_t: 4", "  n_t: 4\n  solver: {max_iters: 3}"), "unknown option"),
])
def test_validation_errors(edit, message):
    text = SINGLE_LINK
    if "weights" in edit[0]:
        text += "objective:\n  weights: {speed: 1}\n"
    else:
        assert edit[0] in text
        text = text.replace(edit[0], edit[1])
    with pytest.raises(ScenarioError, match=message):
        load_scenario(text)


def test_hints_that_do_not_assemble_are_rejected():
    # with the solver switched off a displaced hint cannot be repaired
    text = SINGLE_LINK.replace("position: [0.0, 0.0, 0.3]", "position: [0.5, 0.0, 0.3]")
    text = text.replace("  dt: 0.1\n", "  dt: 0.1\n  solver: {max_iter: 0, polish: 0}\n")
    with pytest.raises(ScenarioError, match="do not assemble"):
        load_scenario(text)
    # the default solver pulls the same hint onto the constraint manifold
    sc = load_scenario(text.replace("  solver: {max_iter: 0, polish: 0}\n", ""))
    assert sc.st0[9] == pytest.approx(0.0, abs=1e-8)


def test_goal_angles_are_degrees():
    sc = load_scenario(SINGLE_LINK + "objective:\n  goal: {offset: [0, 0, 0, 90, 0, 0]}\n")
    X0 = np.array(sc.objective.goal.target)
    assert X0[3] == pytest.approx(np.radians(30.0) + np.pi / 2)


def test_design_offsets_read_from_optimizer_section():
    sc = load_scenario(SINGLE_LINK + "optimizer:\n  design: {link.tip: 0.1}\n")
    assert np.array_equal(sc.dp0, [0.1])
    with pytest.raises(ScenarioError, match="not an optimizable point"):
        load_scenario(SINGLE_LINK + "optimizer:\n  design: {link.pivot: 0.1}\n")


def test_shipped_set():
    assert EXPECTED <= set(shipped_scenarios())


@pytest.mark.parametrize("name", sorted(EXPECTED))
def test_shipped_scenario_loads_and_simulates_quickly(name):
    t0 = time.perf_counter()
    sc = load_scenario_file(resolve_scenario(name))
    traj = sc.simulate()
    assert time.perf_counter() - t0 < 10.0
    assert traj.n_t == sc.n_t
    assert "artifact-chosen" in sc.description or name.startswith("gradcheck")


def test_resolve_forms(tmp_path):
    assert resolve_scenario("fig4") == resolve_scenario("scenario_fig4") == resolve_scenario("fig4.yaml")
    assert resolve_scenario("small").name == "gradcheck_single.yaml"
    p = tmp_path / "mine.yaml"
    p.write_text(SINGLE_LINK)
    assert resolve_scenario(str(p)) == p
    with pytest.raises(ScenarioError):
        resolve_scenario("no_such_scenario")


@pytest.mark.parametrize("name", ["fig2a", "fig1b", "fig8", "gradcheck_chain"])
def test_round_trip(name):
    sc = shipped(name)
    again = load_scenario(dump_scenario(sc))
    assert again.topology.bodies == sc.topology.bodies
    assert again.topology.joints == sc.topology.joints
    assert again.topology.end_effector == sc.topology.end_effector
    assert np.array_equal(again.ride_heights, sc.ride_heights)
    assert np.allclose(again.st0, sc.st0, atol=1e-12)
    assert np.allclose(again.m0, sc.m0, atol=1e-12)
    assert np.array_equal(again.dp0, sc.dp0)
    assert np.allclose(again.objective.goal.target, sc.objective.goal.target, atol=1e-12)
    assert again.objective.weights == sc.objective.weights
    assert again.objective.obstacles == sc.objective.obstacles
    assert (again.n_t, again.dt, again.optimizer, again.solver) == (sc.n_t, sc.dt, sc.optimizer, sc.solver)
    # and a second trip is textually stable
    assert dump_scenario(again) == dump_scenario(load_scenario(dump_scenario(again)))


def test_init_controls_reference_resolves_next_to_file(tmp_path):
    sc = shipped("fig9")
    (tmp_path / "warm.csv").write_text(write_controls(sc.topology, sc.init_controls))
    doc = scenario_to_dict(sc)
    doc["optimizer"]["init_controls"] = "warm.csv"
    (tmp_path / "fig9_copy.yaml").write_text(yaml.safe_dump(doc))
    again = load_scenario_file(tmp_path / "fig9_copy.yaml")
    assert np.array_equal(again.init_controls, sc.init_controls)
    doc["optimizer"]["init_controls"] = "missing.csv"
    (tmp_path / "bad.yaml").write_text(yaml.safe_dump(doc))
    with pytest.raises((ScenarioError, OSError)):
        load_scenario_file(tmp_path / "bad.yaml")
