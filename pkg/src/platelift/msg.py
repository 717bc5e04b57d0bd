"""Manipulation state graph: feasibility filtering, merge, and path search.

The dense contact graph knows nothing about robots.  This module crosses it
with every robot configuration (RConf): a pose node survives for an RConf
when each hand placement has a collision-free IK solution and the contact
force optimization is feasible.  The per-RConf survivors (DCSG-RV graphs)
are merged into one manipulation state graph whose edges carry the three
cost rules -- constant for same-contact maneuvers, exponential in the
restraint-rank change for contact transitions, total joint torque for
regrasps -- and a multi-start/multi-goal shortest-path routine answers
planning queries on the merged graph.
"""
from __future__ import annotations

import heapq
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .contact_graph import ContactNode, DenseContactGraph
from .geometry import Pose
from .grasp_db import GRIP, RConf, SuctionConfig, rconf_subset, to_world
from .kinematics import (DualArm, Environment, ObstacleBox, arm_capsules,
                         capsules_cross, clear_of_world, hand_capsules,
                         joint_torques)
from .statics import (ContactSpec, ForceLimits, ForceSolution, ObjectiveWeights,
                      assemble_system, frame_from_z, restraint_rank, solve_socp)

_EZ = np.array([0.0, 0.0, 1.0])


class MsgError(ValueError):
    pass


@dataclass(frozen=True)
class PhysicsParams:
    """Friction and budget constants shared by every feasibility check."""

    mu_grip: float = 0.8
    mu_push: float = 0.4
    mu_env: float = 0.3
    grip_eps: float = 0.01   # soft-finger torsion eccentricity (m)
    payload: float = 15.0    # per-contact hand force budget (N)
    gravity: float = 9.81
    k_gp: float = 1.0        # objective weight on the hand force bound
    k_s: float = 1.0         # objective weight on the suction force bound

    def weights(self) -> ObjectiveWeights:
        return ObjectiveWeights(self.k_gp, self.k_s)

    def limits(self, suction: SuctionConfig) -> ForceLimits:
        return ForceLimits(self.payload, suction.max_force)


@dataclass(frozen=True)
class EdgeCostParams:
    """k: same-contact maneuver cost; omega: contact-transition weight."""

    k: float = 1.0
    omega: float = 1.0

    def __post_init__(self):
        if self.k <= 0 or self.omega <= 0:
            raise MsgError("edge cost constants must be positive")


@dataclass
class MsgNode:
    """One manipulation state: a plate pose node paired with an RConf.

    Carries everything later stages ask for: the optimized contact forces,
    the IK joint vectors, the static joint torques those forces induce, and
    the restraint rank of the environment contacts.
    """

    contact: ContactNode
    rconf: RConf                 # plate frame
    solution: ForceSolution
    joints: dict                 # hand -> joint vector
    torques: dict                # hand -> joint torque vector
    rank: int
    contacts: list               # ContactSpec list fed to the optimizer
    node_id: int = -1            # global id, assigned by merge_msg

    @property
    def key(self) -> tuple:
        return (self.contact.node_id, self.rconf.rconf_id)

    @property
    def torque_sum(self) -> float:
        return float(sum(np.sum(np.abs(t)) for t in self.torques.values()))


@dataclass(frozen=True)
class MsgEdge:
    """Directed edge a -> b; transfer moves the plate, transit swaps hands."""

    a: int
    b: int
    kind: str   # 'transfer' | 'transit'
    cost: float

    def __post_init__(self):
        if self.kind not in ("transfer", "transit"):
            raise MsgError(f"unknown edge kind {self.kind!r}")
        if not self.cost >= 0.0:
            raise MsgError("edge cost must be nonnegative")


@dataclass
class DcsgRv:
    """A dense contact graph filtered against one robot configuration."""

    rconf: RConf
    nodes: dict   # contact node id -> MsgNode
    edges: list   # retained (ci, cj, kind) with ci < cj


@dataclass
class Msg:
    nodes: list
    edges: list   # directed MsgEdge
    params: EdgeCostParams

    def adjacency(self) -> list:
        adj = [[] for _ in self.nodes]
        for e in self.edges:
            adj[e.a].append((e.b, e.cost, e.kind))
        return adj

    def node_ids(self, pc: str | None = None, rconf_id: str | None = None,
                 pose: Pose | None = None, tol: float = 1e-9) -> list:
        out = []
        for n in self.nodes:
            if pc is not None and n.contact.pc.label != pc:
                continue
            if rconf_id is not None and n.rconf.rconf_id != rconf_id:
                continue
            if pose is not None and not n.contact.pose.almost_equal(pose, tol):
                continue
            out.append(n.node_id)
        return out


def env_contact_points(plate, pose: Pose, table_height: float,
                       tol: float = 1e-6) -> list:
    """(corner index, world point) for every bottom corner on the support plane."""
    bottom = pose.transform_point(plate.bottom_corners())
    return [(i, bottom[i]) for i in range(4)
            if abs(bottom[i, 2] - table_height) <= tol]


def contact_specs(node: ContactNode, rconf: RConf, suction: SuctionConfig,
                  physics: PhysicsParams, plate, table_height: float,
                  tol: float = 1e-6) -> list:
    """Force-optimization contact set for one (pose, RConf) cell.

    Order is fixed (suction, hand contacts, environment corners) so solver
    output is reproducible run to run.
    """
    pose = node.pose
    specs = [ContactSpec("suction", "suction", suction.world_point(pose),
                         frame_from_z(pose.transform_direction(_EZ)),
                         suction.mu, pad_radius=suction.pad_radius,
                         kappa=suction.kappa)]
    for p in to_world(rconf, pose).placements:
        mu = physics.mu_grip if p.hand == GRIP else physics.mu_push
        for k, (pt, nm) in enumerate(zip(p.points, p.normals)):
            specs.append(ContactSpec(f"{p.placement_id}.{k}", p.hand, pt,
                                     frame_from_z(nm), mu, eps=physics.grip_eps))
    for i, pt in env_contact_points(plate, pose, table_height, tol):
        specs.append(ContactSpec(f"env{i}", "env", pt, frame_from_z(_EZ),
                                 physics.mu_env))
    return specs


def node_rank(node: ContactNode, plate, table_height: float,
              tol: float = 1e-6) -> int:
    """Restraint rank of a pose node's environment contacts (0 when airborne)."""
    pts = [pt for _, pt in env_contact_points(plate, node.pose, table_height, tol)]
    if not pts:
        return 0
    normals = np.tile(_EZ, (len(pts), 1))
    return restraint_rank(np.array(pts), normals, node.com_world)


def _solve_placement(placement, arms: DualArm, plate_box: ObstacleBox,
                     env: Environment):
    """IK + world-collision gauntlet for one world placement.

    Returns (q, capsules) or None.  The capsules cover both the arm links
    and the hand body; the caller runs arm-vs-arm checks on them.
    """
    chain = arms.arms[placement.hand]
    hand_caps = hand_capsules(placement)
    if not clear_of_world(hand_caps, plate_box, env, placement.points):
        return None

    def accept(q):
        return clear_of_world(arm_capsules(chain, q), plate_box, env,
                              placement.points)

    q = chain.ik(placement.pose, accept=accept)
    if q is None:
        return None
    return q, arm_capsules(chain, q) + hand_caps


def _check_cell(node: ContactNode, rconf: RConf, suction: SuctionConfig,
                arms: DualArm, physics: PhysicsParams, env: Environment,
                plate, ik_cache: dict | None) -> MsgNode | None:
    """Full feasibility of one (pose node, RConf) cell; None when it fails."""
    world = to_world(rconf, node.pose)
    plate_box = ObstacleBox(node.pose, plate.half)
    joints: dict[str, np.ndarray] = {}
    capsules: dict[str, list] = {}
    for p in world.placements:
        key = (node.node_id, p.placement_id)
        if ik_cache is not None and key in ik_cache:
            hit = ik_cache[key]
        else:
            hit = _solve_placement(p, arms, plate_box, env)
            if ik_cache is not None:
                ik_cache[key] = hit
        if hit is None:
            return None
        joints[p.hand], capsules[p.hand] = hit
    hands = sorted(capsules)
    for i, a in enumerate(hands):
        for b in hands[i + 1:]:
            if capsules_cross(capsules[a], capsules[b]):
                return None

    specs = contact_specs(node, rconf, suction, physics, plate, env.table_height)
    system = assemble_system(specs, plate.mass, node.com_world, physics.gravity)
    sol = solve_socp(system, weights=physics.weights(),
                     limits=physics.limits(suction))
    if not sol.feasible:
        return None

    torques: dict[str, np.ndarray] = {}
    by_label = {c.label: c for c in specs}
    for p in world.placements:
        tcp = p.pose.translation
        force = np.zeros(3)
        moment = np.zeros(3)
        for k in range(len(p.points)):
            c = by_label[f"{p.placement_id}.{k}"]
            w = sol.wrenches[c.label]
            f_w = c.rotation @ w.force
            force += f_w
            moment += c.rotation @ w.torque + np.cross(c.position - tcp, f_w)
        torques[p.hand] = joint_torques(arms.arms[p.hand], joints[p.hand],
                                        np.concatenate([force, moment]))
    rank = node_rank(node, plate, env.table_height)
    return MsgNode(node, rconf, sol, joints, torques, rank, specs)


def build_dcsg_rv(dcsg: DenseContactGraph, rconf: RConf, suction: SuctionConfig,
                  arms: DualArm, physics: PhysicsParams,
                  env: Environment | None = None,
                  ik_cache: dict | None = None) -> DcsgRv:
    """Filters the dense contact graph against one robot configuration.

    A node survives when every hand placement of the RConf has a
    collision-free IK solution at that plate pose and the contact force
    optimization (suction + hands + environment) is feasible.  Edges between
    surviving nodes are retained unchanged.
    """
    if env is None:
        env = Environment(table_height=dcsg.table_height)
    nodes: dict[int, MsgNode] = {}
    for node in dcsg.nodes:
        cell = _check_cell(node, rconf, suction, arms, physics, env,
                           dcsg.plate, ik_cache)
        if cell is not None:
            nodes[node.node_id] = cell
    edges = [(i, j, kind) for i, j, kind in dcsg.edges
             if i in nodes and j in nodes]
    return DcsgRv(rconf, nodes, edges)


def _build_rv_job(args):
    dcsg, rconf, suction, arms, physics, env = args
    return build_dcsg_rv(dcsg, rconf, suction, arms, physics, env, ik_cache={})


def build_all_rvs(dcsg: DenseContactGraph, rconfs: list, suction: SuctionConfig,
                  arms: DualArm, physics: PhysicsParams,
                  env: Environment | None = None, jobs: int = 1) -> list:
    """One DCSG-RV per RConf, in input order.

    Serial builds share an IK cache across RConfs (the same placement at the
    same pose appears in many configurations); parallel builds trade that
    reuse for process-level concurrency.  Results are identical either way
    because every cell check is a pure function of its inputs.
    """
    if env is None:
        env = Environment(table_height=dcsg.table_height)
    if jobs <= 1:
        cache: dict = {}
        return [build_dcsg_rv(dcsg, rc, suction, arms, physics, env, cache)
                for rc in rconfs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        args = [(dcsg, rc, suction, arms, physics, env) for rc in rconfs]
        return list(pool.map(_build_rv_job, args))


def edge_cost(node_a: MsgNode, node_b: MsgNode, params: EdgeCostParams) -> float:
    """Directed cost a -> b under the three-case rule.

    Same pose (transit): total joint torque borne at both endpoints.  Same
    principal contact (maneuver): the constant k.  Different principal
    contact: omega * exp(-(c_a - c_b)), cheap when the plate loses restraint
    and expensive when it regains it.
    """
    if node_a.contact.node_id == node_b.contact.node_id:
        return node_a.torque_sum + node_b.torque_sum
    if node_a.contact.pc.label == node_b.contact.pc.label:
        return params.k
    return params.omega * math.exp(-(node_a.rank - node_b.rank))


def merge_msg(dcsg_rvs: list, params: EdgeCostParams | None = None) -> Msg:
    """Union of the DCSG-RVs plus transit edges between subset-related RConfs.

    Transfer edges come from each RV's retained contact-graph edges; transit
    edges join nodes that share the exact same pose node while one RConf's
    placement set contains the other's.  Every edge is emitted in both
    directions with its direction's cost.
    """
    if not dcsg_rvs:
        raise MsgError("merge needs at least one DCSG-RV")
    params = params or EdgeCostParams()
    nodes: list[MsgNode] = []
    for rv in dcsg_rvs:
        for ci in sorted(rv.nodes):
            n = rv.nodes[ci]
            n.node_id = len(nodes)
            nodes.append(n)
    edges: list[MsgEdge] = []
    for rv in dcsg_rvs:
        for ci, cj, _kind in rv.edges:
            a, b = rv.nodes[ci], rv.nodes[cj]
            edges.append(MsgEdge(a.node_id, b.node_id, "transfer",
                                 edge_cost(a, b, params)))
            edges.append(MsgEdge(b.node_id, a.node_id, "transfer",
                                 edge_cost(b, a, params)))
    for i, rva in enumerate(dcsg_rvs):
        for rvb in dcsg_rvs[i + 1:]:
            if rva.rconf.rconf_id == rvb.rconf.rconf_id:
                continue
            if not (rconf_subset(rva.rconf, rvb.rconf)
                    or rconf_subset(rvb.rconf, rva.rconf)):
                continue
            for ci in sorted(set(rva.nodes) & set(rvb.nodes)):
                a, b = rva.nodes[ci], rvb.nodes[ci]
                cost = edge_cost(a, b, params)
                edges.append(MsgEdge(a.node_id, b.node_id, "transit", cost))
                edges.append(MsgEdge(b.node_id, a.node_id, "transit", cost))
    return Msg(nodes, edges, params)


@dataclass
class SearchResult:
    node_ids: list
    edge_costs: list
    edge_kinds: list
    total: float

    @property
    def start(self) -> int:
        return self.node_ids[0]

    @property
    def goal(self) -> int:
        return self.node_ids[-1]


def shortest_path(n_nodes: int, edges: list, starts: list, goals: list,
                  heuristic=None) -> tuple | None:
    """Least-cost path over directed (a, b, cost) edges; None when cut off.

    Runs one best-first sweep per start (A* with the given admissible
    heuristic, uniform-cost when none), keeps the cheapest path each sweep
    finds to any goal, and returns the cheapest across starts as
    (total, [node ids]).  Ties break toward the lowest node id, so results
    are deterministic for a fixed input order.
    """
    goal_set = set(goals)
    adj: list[list] = [[] for _ in range(n_nodes)]
    for a, b, cost in edges:
        adj[a].append((b, cost))
    best: tuple | None = None
    for start in sorted(set(starts)):
        res = _sweep(adj, start, goal_set, heuristic)
        if res is not None and (best is None or res[0] < best[0]):
            best = res
    return best


def _sweep(adj: list, start: int, goal_set: set, heuristic) -> tuple | None:
    h0 = heuristic(start) if heuristic else 0.0
    dist = {start: 0.0}
    parent: dict[int, int] = {}
    heap = [(h0, start)]
    closed: set[int] = set()
    while heap:
        f, u = heapq.heappop(heap)
        if u in closed:
            continue
        closed.add(u)
        if u in goal_set:
            path = [u]
            while path[-1] != start:
                path.append(parent[path[-1]])
            return dist[u], path[::-1]
        du = dist[u]
        for v, cost in adj[u]:
            nd = du + cost
            if v not in dist or nd < dist[v]:
                dist[v] = nd
                parent[v] = u
                hv = heuristic(v) if heuristic else 0.0
                heapq.heappush(heap, (nd + hv, v))
    return None


_MAX_RANK = 3


def search(msg: Msg, starts: list, goals: list,
           heuristic: str = "none") -> SearchResult | None:
    """Multi-start/multi-goal query on the manipulation state graph.

    `starts` and `goals` are global node ids (see `Msg.node_ids` for the
    usual selectors).  `heuristic` is 'none' (uniform cost, the default and
    the provably optimal choice) or 'nc' (admissible lower bound for
    No-Contact goals: any path still has to pay at least one contact
    transition of at least omega * exp(-3)).
    """
    if not starts:
        raise MsgError("no manipulation state matches the start state")
    if not goals:
        raise MsgError("no manipulation state matches the goal state")
    goal_set = set(goals)
    if heuristic == "nc":
        floor = msg.params.omega * math.exp(-_MAX_RANK)

        def h(nid: int) -> float:
            return 0.0 if nid in goal_set else floor
    elif heuristic == "none":
        h = None
    else:
        raise MsgError(f"unknown heuristic {heuristic!r}")
    res = shortest_path(len(msg.nodes), [(e.a, e.b, e.cost) for e in msg.edges],
                        starts, goals, h)
    if res is None:
        return None
    total, path = res
    lookup = {}
    for e in msg.edges:
        key = (e.a, e.b)
        if key not in lookup or e.cost < lookup[key].cost:
            lookup[key] = e
    costs, kinds = [], []
    for a, b in zip(path[:-1], path[1:]):
        e = lookup[(a, b)]
        costs.append(e.cost)
        kinds.append(e.kind)
    return SearchResult(path, costs, kinds, total)


def msg_stats(rvs: list, msg: Msg) -> dict:
    """Node/edge counts per configuration and for the merged graph."""
    per_rv = []
    for rv in rvs:
        per_rv.append({
            "rconf": rv.rconf.rconf_id,
            "nodes": len(rv.nodes),
            "edges": len(rv.edges),
        })
    kinds = {"transfer": 0, "transit": 0}
    for e in msg.edges:
        kinds[e.kind] += 1
    return {
        "rvs": per_rv,
        "msg_nodes": len(msg.nodes),
        "msg_edges_directed": len(msg.edges),
        "transfer_edges": kinds["transfer"] // 2,
        "transit_edges": kinds["transit"] // 2,
    }
