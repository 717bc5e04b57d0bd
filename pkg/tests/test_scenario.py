"""Scenario loading and the end-to-end planning entry point."""

from __future__ import annotations

import json

import numpy as np
import pytest

from platelift.liftsim import default_profile
from platelift.msg import MsgError
from platelift.scenario import (ScenarioError, bundled_scenarios,
                                bundled_scenario_path, load_scenario,
                                plan_scenario, resolve_scenario)


def test_bundled_catalog():
    assert bundled_scenarios() == ["ab1", "ab2", "ab3", "pb1", "pb2"]


def test_bundled_ab1_fields():
    scn = resolve_scenario("ab1")
    assert scn.name == "ab1"
    assert scn.plate.mass == 4.0
    assert scn.plate.height == 0.04          # json key is 'thickness'
    assert scn.suction.max_force == 20.0
    assert scn.seed == 7
    assert scn.controller.b_d == 60.0        # stiff-contact tracking gains
    assert scn.profile == default_profile()  # no profile block -> default
    assert scn.table_height == 0.0
    hands = {p.hand for p in scn.placements}
    assert hands == {"grip", "push"}
    assert len(scn.rconfs()) > len(scn.placements)
    assert set(scn.arms.arms) == {"grip", "push"}


def test_pb_scenarios_differ_only_in_the_cup():
    strong = resolve_scenario("pb1")
    weak = resolve_scenario("pb2")
    assert strong.plate.mass == weak.plate.mass == 6.4
    assert strong.suction.max_force == 60.0
    assert weak.suction.max_force == 20.0


def test_resolve_accepts_paths(tmp_path):
    doc = json.loads(bundled_scenario_path("ab1").read_text())
    data_dir = bundled_scenario_path("ab1").parent.parent
    # file references resolve against the scenario's own directory
    for key in ("arms", "grasp_db"):
        if isinstance(doc.get(key), str):
            doc[key] = str((data_dir / "scenarios" / doc[key]).resolve())
    p = tmp_path / "copy.json"
    p.write_text(json.dumps(doc))
    scn = resolve_scenario(p)
    assert scn.name == "ab1"
    assert scn.source == p


def test_unknown_name_and_bad_files_raise(tmp_path):
    with pytest.raises(ScenarioError):
        resolve_scenario("nope")
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(ScenarioError):
        load_scenario(broken)
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "missing.json")


def test_scenario_rejects_off_plate_suction(tmp_path):
    doc = json.loads(bundled_scenario_path("ab1").read_text())
    doc["suction"]["position"] = [0.0, 0.0, 0.5]
    p = tmp_path / "bad_cup.json"
    p.write_text(json.dumps(doc))
    with pytest.raises((ScenarioError, ValueError)):
        load_scenario(p)


def test_plan_rejects_unknown_goal():
    scn = resolve_scenario("ab1")
    with pytest.raises(MsgError):
        plan_scenario(scn, goal="f9@floor")


def test_planned_ab1_reaches_no_contact(ab1_outcome):
    assert ab1_outcome.found
    res = ab1_outcome.result
    labels = [ab1_outcome.msg.nodes[i].contact.pc.label
              for i in res.node_ids]
    assert labels[0] == "f0@table"
    assert labels[-1] == "none"
    changes = sum(1 for a, b in zip(labels, labels[1:]) if a != b)
    assert 1 <= changes <= 5
    assert res.total > 0.0
    # starts pin the initial pose, goals pin the airborne contact
    pose0 = ab1_outcome.scenario.initial_pose
    for nid in ab1_outcome.starts:
        assert ab1_outcome.msg.nodes[nid].contact.pose.almost_equal(
            pose0, tol=1e-9)
    for nid in ab1_outcome.goals:
        assert ab1_outcome.msg.nodes[nid].contact.pc.is_no_contact


def test_planned_states_respect_hand_budget(ab1_outcome):
    payload = ab1_outcome.scenario.physics.payload
    suction_max = ab1_outcome.scenario.suction.max_force
    for nid in ab1_outcome.result.node_ids:
        sol = ab1_outcome.msg.nodes[nid].solution
        assert sol.f_gp_plus <= payload + 1e-6
        assert sol.f_s_plus <= suction_max + 1e-6


def test_weak_cup_scenario_has_no_path():
    outcome = plan_scenario(resolve_scenario("pb2"))
    assert not outcome.found
    assert outcome.goals == []  # no feasible airborne state exists at all
    assert outcome.terminal_node() is None
    last = outcome.last_reachable_pc()
    assert last.endswith("@table") and last != "none"
