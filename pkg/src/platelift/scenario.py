"""Scenario files: everything one planning problem needs, in one JSON.

A scenario names the plate, its initial pose, the suction cup, the arm
pair, the grasp database, and every tuning constant the pipeline consumes.
Grasp databases and arm descriptions live in separate files referenced by
relative path, so plates can share them.  `bundled_scenarios()` lists the
ones shipped inside the package.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .contact_graph import (SamplingParams, build_csg, classify_contact,
                            sample_dcsg)
from .geometry import PlateModel, Pose, rot_x, rot_y, rot_z
from .grasp_db import SuctionConfig, expand_rconfs, load_grasp_db
from .kinematics import DualArm, Environment, ObstacleBox, arms_from_doc
from .liftsim import (ControllerParams, LifterProfile, PlantParams,
                      default_profile, profile_from_doc)
from .msg import (EdgeCostParams, Msg, MsgError, PhysicsParams, SearchResult,
                  build_all_rvs, merge_msg, search)


class ScenarioError(ValueError):
    pass


def pose_from_doc(doc: dict) -> Pose:
    """{"position": [x,y,z], "rpy_deg": [roll,pitch,yaw]} -> Pose."""
    r, p, y = (math.radians(a) for a in doc.get("rpy_deg", (0.0, 0.0, 0.0)))
    return Pose(rot_z(y) @ rot_y(p) @ rot_x(r), np.asarray(doc["position"], float))


def _sampling_from_doc(doc: dict) -> SamplingParams:
    rad = lambda seq: tuple(math.radians(a) for a in seq)
    kw = {}
    if "face_grid" in doc:
        kw["face_grid"] = tuple(doc["face_grid"])
    if "face_step" in doc:
        kw["face_step"] = float(doc["face_step"])
    if "yaws_deg" in doc:
        kw["yaws"] = rad(doc["yaws_deg"])
    if "edge_tilts_deg" in doc:
        kw["edge_tilts"] = rad(doc["edge_tilts_deg"])
    if "vertex_tilts_deg" in doc:
        kw["vertex_tilts"] = rad(doc["vertex_tilts_deg"])
    if "nc_heights" in doc:
        kw["nc_heights"] = tuple(float(h) for h in doc["nc_heights"])
    if "com_step_threshold" in doc:
        kw["com_step_threshold"] = float(doc["com_step_threshold"])
    return SamplingParams(**kw)


@dataclass
class Scenario:
    name: str
    plate: PlateModel
    initial_pose: Pose
    table_height: float
    suction: SuctionConfig
    arms: DualArm
    placements: list
    env: Environment
    sampling: SamplingParams
    physics: PhysicsParams
    cost: EdgeCostParams
    controller: ControllerParams
    plant: PlantParams
    profile: LifterProfile
    duration: float
    seed: int
    source: Path | None = None

    def rconfs(self) -> list:
        return expand_rconfs(self.placements)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    base = path.parent
    try:
        p = doc["plate"]
        plate = PlateModel(p["length"], p["width"], p["thickness"], p["mass"],
                           np.asarray(p.get("com", (0.0, 0.0, 0.0)), float))
        initial_pose = pose_from_doc(doc["initial_pose"])
        table_height = float(doc.get("table_height", 0.0))
        s = doc["suction"]
        suction = SuctionConfig(np.asarray(s["position"], float),
                                pad_radius=float(s.get("pad_radius", 0.02)),
                                kappa=float(s.get("kappa", 40.0)),
                                mu=float(s.get("mu", 0.5)),
                                max_force=float(s["max_force"]))
        suction.validate_on(plate)
        arms_doc = json.loads((base / doc["arms"]).read_text())
        arms = arms_from_doc(arms_doc)
        grasp_doc = json.loads((base / doc["grasp_db"]).read_text())
        placements = load_grasp_db(grasp_doc, plate)
        obstacles = [ObstacleBox(pose_from_doc(ob), np.asarray(ob["half"], float))
                     for ob in doc.get("obstacles", ())]
        env = Environment(table_height=table_height, obstacles=obstacles)
        physics = PhysicsParams(**doc.get("physics", {}))
        cost = EdgeCostParams(**doc.get("cost", {}))
        sampling = _sampling_from_doc(doc.get("sampling", {}))
        controller = ControllerParams(**doc.get("controller", {}))
        seed = int(doc.get("seed", 0))
        plant_kw = dict(doc.get("plant", {}))
        plant = PlantParams(plate=plate, suction=suction,
                            seed=int(plant_kw.pop("seed", seed)), **plant_kw)
        profile = profile_from_doc(doc["profile"]) if "profile" in doc \
            else default_profile()
        duration = float(doc.get("duration", profile.duration))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"scenario {path.name}: {exc}") from exc
    classify_contact(plate, initial_pose, table_height)
    return Scenario(doc.get("name", path.stem), plate, initial_pose,
                    table_height, suction, arms, placements, env, sampling,
                    physics, cost, controller, plant, profile, duration, seed,
                    source=path)


def bundled_scenarios() -> list:
    root = resources.files("platelift").joinpath("data/scenarios")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def bundled_scenario_path(name: str) -> Path:
    p = resources.files("platelift").joinpath(f"data/scenarios/{name}.json")
    if not p.is_file():
        raise ScenarioError(
            f"unknown scenario {name!r}; bundled: {', '.join(bundled_scenarios())}")
    return Path(str(p))


def resolve_scenario(name_or_path) -> Scenario:
    """Accepts a bundled scenario name or a path to a scenario file."""
    p = Path(name_or_path)
    if p.suffix == ".json" or p.exists():
        return load_scenario(p)
    return load_scenario(bundled_scenario_path(str(name_or_path)))


@dataclass
class PlanOutcome:
    scenario: Scenario
    dcsg: object
    rvs: list
    msg: Msg
    result: SearchResult | None
    starts: list = field(default_factory=list)
    goals: list = field(default_factory=list)

    @property
    def found(self) -> bool:
        return self.result is not None

    def terminal_node(self):
        if self.result is None:
            return None
        return self.msg.nodes[self.result.node_ids[-1]]

    def last_reachable_pc(self) -> str:
        """Least-restrained contact reachable from the starts (for diagnostics)."""
        reach = set()
        adj = self.msg.adjacency()
        stack = list(self.starts)
        while stack:
            u = stack.pop()
            if u in reach:
                continue
            reach.add(u)
            stack.extend(v for v, _c, _k in adj[u])
        ranks: dict[str, int] = {}
        for u in reach:
            n = self.msg.nodes[u]
            lab = n.contact.pc.label
            ranks[lab] = min(ranks.get(lab, 99), n.rank)
        return min(ranks, key=lambda lab: (ranks[lab], lab))


def build_graph(scn: Scenario, jobs: int = 1):
    """DCSG sampling, per-RConf filtering, and the merged graph."""
    dcsg = sample_dcsg(scn.plate, scn.initial_pose, scn.sampling,
                       scn.table_height)
    rvs = build_all_rvs(dcsg, scn.rconfs(), scn.suction, scn.arms,
                        scn.physics, scn.env, jobs=jobs)
    msg = merge_msg(rvs, scn.cost)
    return dcsg, rvs, msg


def plan_scenario(scn: Scenario, goal: str = "none", jobs: int = 1,
                  heuristic: str = "none") -> PlanOutcome:
    """End-to-end: sample, filter, merge, search initial pose -> goal contact."""
    labels = {n.label for n in build_csg(scn.plate).nodes}
    if goal not in labels:
        raise MsgError(f"unknown goal contact {goal!r}; "
                       f"choose one of {sorted(labels)}")
    dcsg, rvs, msg = build_graph(scn, jobs=jobs)
    starts = msg.node_ids(pose=scn.initial_pose)
    if not starts:
        raise MsgError(
            f"no manipulation state matches the initial pose of {scn.name!r}")
    goals = msg.node_ids(pc=goal)
    # A valid goal contact that no feasible state realises is a planning
    # failure (report how far the graph reaches), not a usage error.
    result = search(msg, starts, goals, heuristic=heuristic) if goals else None
    return PlanOutcome(scn, dcsg, rvs, msg, result, starts, goals)
