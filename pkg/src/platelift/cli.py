"""Command-line pipeline: plan, simulate, verify, graph-stats, gen-grasps.

Exit codes: 0 on success, 1 when planning finds no path (or a simulation or
verification fails), 2 on invalid input.  Plan documents are deliberately
timing-free and serialized with sorted keys, so re-running a command with
the same inputs reproduces the artifact byte for byte.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from .contact_graph import NO_CONTACT_LABEL
from .geometry import PlateModel, Pose
from .grasp_db import GraspDBError, SuctionConfig, generate_grasp_db
from .liftsim import (LifterProfile, PlantParams, Trace, default_profile,
                      profile_from_doc, red_line, simulate_lift, suction_share,
                      target_forces, zero_profile)
from .msg import MsgError, MsgNode, msg_stats
from .scenario import PlanOutcome, Scenario, ScenarioError, plan_scenario, \
    resolve_scenario
from .statics import (ContactSpec, ForceLimits, ForceSolution, Wrench,
                      assemble_system, restraint_rank, verify_solution)

OK, NO_PATH, BAD_INPUT = 0, 1, 2
_EZ = np.array([0.0, 0.0, 1.0])


def _floats(a) -> list:
    return [float(x) for x in np.asarray(a).reshape(-1)]


def _node_entry(node: MsgNode, edge_in: dict | None) -> dict:
    sol = node.solution
    return {
        "node_id": node.node_id,
        "pc": node.contact.pc.label,
        "tag": node.contact.tag,
        "rconf": node.rconf.rconf_id,
        "rank": node.rank,
        "pose": {"position": _floats(node.contact.pose.translation),
                 "quaternion": _floats(node.contact.pose.quat())},
        "com_world": _floats(node.contact.com_world),
        "f_gp_plus": float(sol.f_gp_plus),
        "f_s_plus": float(sol.f_s_plus),
        "contacts": [{
            "label": c.label, "kind": c.kind,
            "position": _floats(c.position), "rotation": _floats(c.rotation),
            "mu": float(c.mu), "eps": float(c.eps),
            "pad_radius": float(c.pad_radius), "kappa": float(c.kappa),
        } for c in node.contacts],
        "wrenches": {lab: {"force": _floats(w.force),
                           "torque": _floats(w.torque)}
                     for lab, w in sorted(sol.wrenches.items())},
        "joints": {h: _floats(q) for h, q in sorted(node.joints.items())},
        "torques": {h: _floats(t) for h, t in sorted(node.torques.items())},
        "edge_in": edge_in,
    }


def contact_state_changes(doc: dict) -> int:
    changes = 0
    for entry in doc["path"][1:]:
        e = entry["edge_in"]
        if e["kind"] == "transit":
            changes += 1
    labels = [entry["pc"] for entry in doc["path"]]
    changes += sum(1 for a, b in zip(labels[:-1], labels[1:]) if a != b)
    return changes


def plan_to_doc(outcome: PlanOutcome, goal: str, heuristic: str) -> dict:
    scn = outcome.scenario
    res = outcome.result
    doc = {
        "scenario": scn.name,
        "goal": goal,
        "heuristic": heuristic,
        "seed": scn.seed,
        "gravity": scn.physics.gravity,
        "table_height": scn.table_height,
        "plate": {"length": scn.plate.length, "width": scn.plate.width,
                  "thickness": scn.plate.height, "mass": scn.plate.mass,
                  "com": _floats(scn.plate.com)},
        "suction": {"position": _floats(scn.suction.position),
                    "pad_radius": scn.suction.pad_radius,
                    "kappa": scn.suction.kappa, "mu": scn.suction.mu,
                    "max_force": scn.suction.max_force},
        "limits": {"payload": scn.physics.payload,
                   "suction_max": scn.suction.max_force},
        "cost_params": {"k": scn.cost.k, "omega": scn.cost.omega},
        "found": outcome.found,
    }
    if res is None:
        doc["path"] = []
        doc["last_reachable_pc"] = outcome.last_reachable_pc()
        return doc
    path = []
    for i, nid in enumerate(res.node_ids):
        edge_in = None
        if i > 0:
            edge_in = {"kind": res.edge_kinds[i - 1],
                       "cost": float(res.edge_costs[i - 1])}
        path.append(_node_entry(outcome.msg.nodes[nid], edge_in))
    doc["path"] = path
    doc["total_cost"] = float(res.total)
    doc["contact_state_changes"] = contact_state_changes(doc)
    terminal = outcome.terminal_node()
    if terminal.contact.pc.is_no_contact:
        targets = target_forces(terminal)
        doc["lift"] = {
            "targets": {h: float(v) for h, v in sorted(targets.items())},
            "suction_share": suction_share(terminal),
            "red_line": red_line(scn.plate, scn.suction),
        }
    return doc


def dump_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _sim_config_doc(scn: Scenario) -> dict:
    """Sim settings a plan must carry so `simulate` needs no scenario file."""
    c = scn.controller
    p = scn.plant
    out = {
        "controller": {"m_d": c.m_d, "b_d": c.b_d, "k_d": c.k_d,
                       "v_d": c.v_d, "dt": c.dt, "v_floor": c.v_floor,
                       "integral_limit": c.integral_limit},
        "plant": {"k_pad": p.k_pad, "c_pad": p.c_pad, "k_hand": p.k_hand,
                  "c_hand": p.c_hand, "k_rot": p.k_rot, "c_rot": p.c_rot,
                  "noise_sigma": p.noise_sigma,
                  "vacuum_limit": p.vacuum_limit,
                  "transient_window": p.transient_window,
                  "substep": p.substep},
    }
    if scn.profile != default_profile():
        out["profile"] = {"segments": [list(seg) for seg in
                                       scn.profile.segments],
                          "jitter_sigma": scn.profile.jitter_sigma}
    return out


def cmd_plan(scn: Scenario, goal: str = NO_CONTACT_LABEL, jobs: int = 1,
             heuristic: str = "none") -> tuple:
    """Returns (plan doc, stats doc, exit code)."""
    t0 = time.perf_counter()
    outcome = plan_scenario(scn, goal=goal, jobs=jobs, heuristic=heuristic)
    elapsed = time.perf_counter() - t0
    doc = plan_to_doc(outcome, goal, heuristic)
    doc.update(_sim_config_doc(scn))
    stats = msg_stats(outcome.rvs, outcome.msg)
    stats.update({
        "scenario": scn.name,
        "dcsg_nodes": len(outcome.dcsg.nodes),
        "dcsg_edges": len(outcome.dcsg.edges),
        "starts": len(outcome.starts),
        "goals": len(outcome.goals),
        "build_and_search_seconds": elapsed,
    })
    if outcome.found:
        stats["path_length"] = len(outcome.result.node_ids)
        stats["total_cost"] = float(outcome.result.total)
        stats["contact_state_changes"] = doc["contact_state_changes"]
        stats["max_hand_force"] = max(
            entry["f_gp_plus"] for entry in doc["path"])
        return doc, stats, OK
    return doc, stats, NO_PATH


# ---------------------------------------------------------------- simulate

class _PlanTerminal:
    """Duck-typed stand-in for an MsgNode, rebuilt from a plan document."""

    def __init__(self, entry: dict):
        from .contact_graph import ContactNode, PrincipalContact
        from .grasp_db import HandPlacement, RConf

        pos = np.asarray(entry["pose"]["position"], float)
        quat = np.asarray(entry["pose"]["quaternion"], float)
        pc = PrincipalContact.no_contact() if entry["pc"] == NO_CONTACT_LABEL \
            else PrincipalContact(*entry["pc"].split("@"))
        self.contact = ContactNode(entry["node_id"], pc,
                                   Pose.from_quat(quat, pos),
                                   np.asarray(entry["com_world"], float),
                                   entry["tag"])
        self.contacts = [_spec_from_doc(c) for c in entry["contacts"]]
        self.solution = _solution_from_doc(entry)
        placements = []
        by_pid: dict[str, list] = {}
        for c in self.contacts:
            if c.kind in ("grip", "push"):
                pid = c.label.rsplit(".", 1)[0]
                by_pid.setdefault(pid, []).append(c)
        for pid, specs in sorted(by_pid.items()):
            pts = np.array([c.position for c in specs])
            nms = np.array([c.rotation[:, 2] for c in specs])
            placements.append(HandPlacement(pid, specs[0].kind,
                                            Pose(specs[0].rotation, pts[0]),
                                            pts, nms))
        self.rconf = RConf(tuple(placements))


def _spec_from_doc(c: dict) -> ContactSpec:
    return ContactSpec(c["label"], c["kind"], np.asarray(c["position"], float),
                       np.asarray(c["rotation"], float).reshape(3, 3),
                       c["mu"], eps=c["eps"], pad_radius=c["pad_radius"],
                       kappa=c["kappa"])


def _solution_from_doc(entry: dict) -> ForceSolution:
    wrenches = {lab: Wrench(np.asarray(w["force"], float),
                            np.asarray(w["torque"], float))
                for lab, w in entry["wrenches"].items()}
    return ForceSolution("feasible", objective=0.0,
                         f_gp_plus=entry["f_gp_plus"],
                         f_s_plus=entry["f_s_plus"], wrenches=wrenches)


def cmd_simulate(plan_doc: dict, profile: LifterProfile | None = None,
                 seed: int | None = None,
                 duration: float | None = None) -> tuple:
    """Returns (Trace, exit code).  Refuses plans that do not end airborne."""
    if not plan_doc.get("found") or not plan_doc["path"]:
        raise ScenarioError("plan has no path to simulate")
    entry = plan_doc["path"][-1]
    if entry["pc"] != NO_CONTACT_LABEL:
        raise ScenarioError(
            f"plan ends at contact {entry['pc']!r}, not at No-Contact")
    terminal = _PlanTerminal(entry)
    p = plan_doc["plate"]
    plate = PlateModel(p["length"], p["width"], p["thickness"], p["mass"],
                       np.asarray(p.get("com", (0, 0, 0)), float))
    s = plan_doc["suction"]
    suction = SuctionConfig(np.asarray(s["position"], float),
                            pad_radius=s["pad_radius"], kappa=s["kappa"],
                            mu=s["mu"], max_force=s["max_force"])
    plant = PlantParams(plate=plate, suction=suction,
                        seed=plan_doc["seed"] if seed is None else seed,
                        **plan_doc.get("plant", {}))
    from .liftsim import ControllerParams
    controller = ControllerParams(**plan_doc.get("controller", {}))
    if profile is None:
        profile = profile_from_doc(plan_doc["profile"]) \
            if "profile" in plan_doc else default_profile()
    trace = simulate_lift(terminal, profile, controller, plant,
                          duration=duration)
    return trace, (OK if trace.status == "success" else NO_PATH)


# ------------------------------------------------------------------ verify

def cmd_verify(plan_doc: dict, tol: float = 1e-6) -> tuple:
    """Re-derives every number a plan claims; returns (report, exit code).

    Three families of checks per the planning rules: static force solutions
    (equilibrium + cone margins), edge legality (pose and configuration never
    change together), and edge costs (recomputed from ranks and torques).
    """
    checks = []

    def add(name, ok, detail=""):
        checks.append({"check": name, "ok": bool(ok), "detail": detail})

    path = plan_doc["path"]
    if not path:
        add("path", False, "plan document has an empty path")
        return {"pass": False, "checks": checks}, NO_PATH
    limits = ForceLimits(plan_doc["limits"]["payload"],
                         plan_doc["limits"]["suction_max"])
    mass = plan_doc["plate"]["mass"]
    gravity = plan_doc["gravity"]
    k = plan_doc["cost_params"]["k"]
    omega = plan_doc["cost_params"]["omega"]

    ranks = []
    for entry in path:
        specs = [_spec_from_doc(c) for c in entry["contacts"]]
        sol = _solution_from_doc(entry)
        system = assemble_system(specs, mass,
                                 np.asarray(entry["com_world"], float), gravity)
        rep = verify_solution(system, sol, tol=tol, limits=limits)
        add(f"forces[{entry['node_id']}]", rep["ok"],
            f"residual {rep['equilibrium_residual']:.2e}")
        env = [c for c in specs if c.kind == "env"]
        if env:
            rank = restraint_rank(np.array([c.position for c in env]),
                                  np.array([c.rotation[:, 2] for c in env]),
                                  np.asarray(entry["com_world"], float))
        else:
            rank = 0
        ranks.append(rank)
        add(f"rank[{entry['node_id']}]", rank == entry["rank"],
            f"stored {entry['rank']}, recomputed {rank}")

    total = 0.0
    for i in range(1, len(path)):
        prev, cur = path[i - 1], path[i]
        edge = cur["edge_in"]
        pose_changed = (prev["pose"] != cur["pose"])
        rconf_changed = (prev["rconf"] != cur["rconf"])
        add(f"legal[{prev['node_id']}->{cur['node_id']}]",
            not (pose_changed and rconf_changed),
            "pose and robot configuration changed together"
            if pose_changed and rconf_changed else "")
        if rconf_changed:
            expect = _torque_total(prev) + _torque_total(cur)
            kind_ok = edge["kind"] == "transit"
        elif prev["pc"] == cur["pc"]:
            expect = k
            kind_ok = edge["kind"] == "transfer"
        else:
            expect = omega * math.exp(-(ranks[i - 1] - ranks[i]))
            kind_ok = edge["kind"] == "transfer"
        add(f"kind[{prev['node_id']}->{cur['node_id']}]", kind_ok,
            f"edge kind {edge['kind']}")
        ok = abs(edge["cost"] - expect) <= 1e-9
        add(f"cost[{prev['node_id']}->{cur['node_id']}]", ok,
            f"stored {edge['cost']:.12g}, recomputed {expect:.12g}")
        total += edge["cost"]
    add("total_cost", abs(total - plan_doc["total_cost"]) <= 1e-9,
        f"stored {plan_doc['total_cost']:.12g}, recomputed {total:.12g}")

    ok = all(c["ok"] for c in checks)
    return {"pass": ok, "checks": checks}, (OK if ok else NO_PATH)


def _torque_total(entry: dict) -> float:
    return float(sum(sum(abs(x) for x in t)
                     for t in entry["torques"].values()))


# -------------------------------------------------------------------- main

def _write(out_dir: Path, name: str, text: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    p = out_dir / name
    p.write_text(text)
    return p


def _load_profile(arg: str | None) -> LifterProfile | None:
    if arg is None or arg == "default":
        return None           # cmd_simulate falls back to plan/profile default
    if arg == "zero":
        return zero_profile()
    return profile_from_doc(json.loads(Path(arg).read_text()))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="platelift",
        description="Regrasp planning and lift control for plate handling")
    sub = ap.add_subparsers(dest="command", required=True)

    p_plan = sub.add_parser("plan", help="plan a contact path for a scenario")
    p_plan.add_argument("--scenario", required=True,
                        help="bundled name or path to a scenario JSON")
    p_plan.add_argument("--goal", default=NO_CONTACT_LABEL,
                        help="goal principal contact label (default: none)")
    p_plan.add_argument("--out", default="out", help="output directory")
    p_plan.add_argument("--jobs", type=int, default=1)
    p_plan.add_argument("--heuristic", default="none", choices=["none", "nc"])

    p_sim = sub.add_parser("simulate", help="closed-loop lift from a plan")
    p_sim.add_argument("--plan", required=True, help="plan JSON from `plan`")
    p_sim.add_argument("--profile", default="default",
                       help="default | zero | path to a profile JSON")
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--duration", type=float, default=None)
    p_sim.add_argument("--out", default="out")

    p_ver = sub.add_parser("verify", help="recheck every number in a plan")
    p_ver.add_argument("--plan", required=True)
    p_ver.add_argument("--out", default=None)

    p_st = sub.add_parser("graph-stats", help="build graphs and report sizes")
    p_st.add_argument("--scenario", required=True)
    p_st.add_argument("--jobs", type=int, default=1)
    p_st.add_argument("--out", default=None)

    p_gen = sub.add_parser("gen-grasps", help="generate a grasp database")
    p_gen.add_argument("--length", type=float, required=True)
    p_gen.add_argument("--width", type=float, required=True)
    p_gen.add_argument("--thickness", type=float, required=True)
    p_gen.add_argument("--mass", type=float, default=1.0)
    p_gen.add_argument("--grip-spacing", type=float, default=0.4)
    p_gen.add_argument("--push-spacing", type=float, default=0.4)
    p_gen.add_argument("--out", required=True)

    args = ap.parse_args(argv)
    try:
        return _dispatch(args)
    except (ScenarioError, MsgError, GraspDBError, FileNotFoundError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return BAD_INPUT


def _dispatch(args) -> int:
    if args.command == "plan":
        scn = resolve_scenario(args.scenario)
        doc, stats, code = cmd_plan(scn, goal=args.goal, jobs=args.jobs,
                                    heuristic=args.heuristic)
        out = Path(args.out)
        plan_path = _write(out, f"{scn.name}_plan.json", dump_json(doc))
        _write(out, f"{scn.name}_stats.json", dump_json(stats))
        if code != OK:
            print(f"NO-PATH: last reachable contact "
                  f"{doc['last_reachable_pc']!r} ({plan_path})")
        else:
            print(f"plan: {len(doc['path'])} states, "
                  f"{doc['contact_state_changes']} contact changes, "
                  f"cost {doc['total_cost']:.4f} ({plan_path})")
        return code

    if args.command == "simulate":
        plan_doc = json.loads(Path(args.plan).read_text())
        trace, code = cmd_simulate(plan_doc, _load_profile(args.profile),
                                   seed=args.seed, duration=args.duration)
        out = Path(args.out)
        name = plan_doc.get("scenario", "plan")
        trace_path = _write(out, f"{name}_trace.csv", trace.to_csv())
        _write(out, f"{name}_trace.json", dump_json(trace.sidecar()))
        print(f"simulate: {trace.status} ({trace_path})")
        return code

    if args.command == "verify":
        plan_doc = json.loads(Path(args.plan).read_text())
        report, code = cmd_verify(plan_doc)
        text = dump_json(report)
        if args.out:
            _write(Path(args.out), "verify.json", text)
        for c in report["checks"]:
            if not c["ok"]:
                print(f"FAIL {c['check']}: {c['detail']}")
        print(f"verify: {'PASS' if report['pass'] else 'FAIL'} "
              f"({len(report['checks'])} checks)")
        return code

    if args.command == "graph-stats":
        scn = resolve_scenario(args.scenario)
        from .scenario import build_graph
        t0 = time.perf_counter()
        dcsg, rvs, msg = build_graph(scn, jobs=args.jobs)
        stats = msg_stats(rvs, msg)
        stats.update({"scenario": scn.name, "dcsg_nodes": len(dcsg.nodes),
                      "dcsg_edges": len(dcsg.edges),
                      "build_seconds": time.perf_counter() - t0})
        text = dump_json(stats)
        if args.out:
            _write(Path(args.out), f"{scn.name}_graph.json", text)
        print(text, end="")
        return OK

    if args.command == "gen-grasps":
        plate = PlateModel(args.length, args.width, args.thickness, args.mass)
        doc = generate_grasp_db(plate, grip_spacing=args.grip_spacing,
                                push_spacing=args.push_spacing)
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(dump_json(doc))
        print(f"gen-grasps: {len(doc['placements'])} placements ({args.out})")
        return OK

    raise ScenarioError(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
