"""Command line entry points: exit codes, artifacts, reproducibility."""

from __future__ import annotations

import json

import pytest

from platelift.cli import main

OK, NO_PATH, BAD_INPUT = 0, 1, 2


def _read(path):
    return json.loads(path.read_text())


def test_plan_writes_plan_and_stats(ab1_plan_dir):
    plan = _read(ab1_plan_dir / "ab1_plan.json")
    stats = _read(ab1_plan_dir / "ab1_stats.json")
    assert plan["found"] is True
    assert plan["scenario"] == "ab1" and plan["goal"] == "none"
    assert plan["path"][0]["pc"] == "f0@table"
    assert plan["path"][-1]["pc"] == "none"
    assert 1 <= plan["contact_state_changes"] <= 5
    assert plan["limits"] == {"payload": 15.0, "suction_max": 20.0}
    # the plan carries its own sim configuration
    assert plan["controller"]["b_d"] == 60.0
    assert plan["plant"]["k_hand"] == 20000.0
    assert plan["lift"]["red_line"] == pytest.approx(19.24, abs=0.01)
    assert set(plan["lift"]["targets"]) <= {"grip", "push"}
    for entry in plan["path"]:
        assert entry["f_gp_plus"] <= 15.0 + 1e-6
        assert {"pc", "rconf", "pose", "contacts", "wrenches",
                "rank"} <= set(entry)
    assert stats["scenario"] == "ab1"
    assert stats["msg_nodes"] > 0 and stats["path_length"] == len(plan["path"])
    assert stats["max_hand_force"] <= 15.0 + 1e-6


def test_plan_is_byte_reproducible(ab1_plan_dir, tmp_path):
    rc = main(["plan", "--scenario", "ab1", "--out", str(tmp_path)])
    assert rc == OK
    first = (ab1_plan_dir / "ab1_plan.json").read_bytes()
    again = (tmp_path / "ab1_plan.json").read_bytes()
    assert first == again


def test_no_path_exit_and_doc(tmp_path):
    rc = main(["plan", "--scenario", "pb2", "--out", str(tmp_path)])
    assert rc == NO_PATH
    plan = _read(tmp_path / "pb2_plan.json")
    assert plan["found"] is False and plan["path"] == []
    assert plan["last_reachable_pc"].endswith("@table")
    stats = _read(tmp_path / "pb2_stats.json")
    assert stats["goals"] == 0
    assert "total_cost" not in stats


def test_unknown_scenario_and_goal_are_usage_errors(tmp_path, capsys):
    assert main(["plan", "--scenario", "nope",
                 "--out", str(tmp_path)]) == BAD_INPUT
    assert main(["plan", "--scenario", "ab1", "--goal", "lid@bin",
                 "--out", str(tmp_path)]) == BAD_INPUT
    err = capsys.readouterr().err
    assert "error:" in err


def test_simulate_from_plan(ab1_plan_dir, tmp_path):
    rc = main(["simulate", "--plan", str(ab1_plan_dir / "ab1_plan.json"),
               "--out", str(tmp_path)])
    assert rc == OK
    csv_text = (tmp_path / "ab1_trace.csv").read_text()
    header = csv_text.split("\n", 1)[0]
    assert header == ("time,F_push,F_grip,F_sum,V_out,lifter_height,"
                      "pad_tension,red_line")
    side = _read(tmp_path / "ab1_trace.json")
    assert side["status"] == "success"
    assert side["red_line"] == pytest.approx(19.24, abs=0.01)
    assert side["steps"] == csv_text.strip().count("\n")  # rows besides header


def test_simulate_is_byte_reproducible(ab1_plan_dir, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    plan = str(ab1_plan_dir / "ab1_plan.json")
    assert main(["simulate", "--plan", plan, "--out", str(a)]) == OK
    assert main(["simulate", "--plan", plan, "--out", str(b)]) == OK
    assert (a / "ab1_trace.csv").read_bytes() == \
        (b / "ab1_trace.csv").read_bytes()
    assert (a / "ab1_trace.json").read_bytes() == \
        (b / "ab1_trace.json").read_bytes()


def test_simulate_seed_override_changes_the_trace(ab1_plan_dir, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    plan = str(ab1_plan_dir / "ab1_plan.json")
    assert main(["simulate", "--plan", plan, "--out", str(a)]) == OK
    assert main(["simulate", "--plan", plan, "--seed", "123",
                 "--out", str(b)]) == OK
    assert (a / "ab1_trace.csv").read_bytes() != \
        (b / "ab1_trace.csv").read_bytes()


def test_simulate_refuses_missing_or_grounded_plans(tmp_path):
    assert main(["simulate", "--plan", str(tmp_path / "none.json"),
                 "--out", str(tmp_path)]) == BAD_INPUT
    # a plan that ends resting on an edge is not liftable
    rc = main(["plan", "--scenario", "ab1", "--goal", "e0@table",
               "--out", str(tmp_path)])
    assert rc == OK
    assert main(["simulate", "--plan", str(tmp_path / "ab1_plan.json"),
                 "--out", str(tmp_path)]) == BAD_INPUT


def test_simulate_zero_profile_succeeds(ab1_plan_dir, tmp_path):
    rc = main(["simulate", "--plan", str(ab1_plan_dir / "ab1_plan.json"),
               "--profile", "zero", "--out", str(tmp_path)])
    assert rc == OK


def test_verify_passes_a_fresh_plan(ab1_plan_dir, tmp_path, capsys):
    rc = main(["verify", "--plan", str(ab1_plan_dir / "ab1_plan.json"),
               "--out", str(tmp_path)])
    assert rc == OK
    report = _read(tmp_path / "verify.json")
    assert report["pass"] is True
    assert all(c["ok"] for c in report["checks"])
    assert "PASS" in capsys.readouterr().out


def test_verify_catches_tampering(ab1_plan_dir, tmp_path, capsys):
    doc = _read(ab1_plan_dir / "ab1_plan.json")
    doc["path"][-1]["wrenches"]["suction"]["force"][2] += 3.0
    bad = tmp_path / "tampered.json"
    bad.write_text(json.dumps(doc))
    rc = main(["verify", "--plan", str(bad), "--out", str(tmp_path)])
    assert rc == NO_PATH
    out = capsys.readouterr().out
    assert "FAIL" in out


def test_graph_stats_runs(tmp_path, capsys):
    rc = main(["graph-stats", "--scenario", "ab1", "--out", str(tmp_path)])
    assert rc == OK
    doc = _read(tmp_path / "ab1_graph.json")
    assert doc["scenario"] == "ab1"
    assert doc["msg_nodes"] > 0 and doc["dcsg_nodes"] > 0


def test_gen_grasps_writes_db(tmp_path):
    out = tmp_path / "db.json"
    rc = main(["gen-grasps", "--length", "0.3", "--width", "0.3",
               "--thickness", "0.04", "--mass", "4.0", "--out", str(out)])
    assert rc == OK
    doc = _read(out)
    assert len(doc["placements"]) == 12
    ids = [p["id"] for p in doc["placements"]]
    assert len(set(ids)) == len(ids)
