"""Serial arm chains, hand/arm collision geometry, and reach checks.

Each hand (the parallel gripper and the push stick) hangs off its own 6-DOF
arm.  A chain is a list of fixed link offsets and joint rotation axes; the
tool transform maps the last joint frame to the hand's TCP, so `fk(q)`
lands directly on a HandPlacement pose.  Collision geometry is capsules for
arm links and hand bodies, boxes for obstacles, a halfspace for the table.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .geometry import Pose
from .grasp_db import GRIP, PUSH, HandPlacement, RConf


@dataclass
class SerialChain:
    name: str
    base: Pose
    offsets: np.ndarray  # (n, 3) fixed translation before each joint
    axes: np.ndarray     # (n, 3) unit rotation axes
    tool: Pose
    lower: np.ndarray
    upper: np.ndarray
    home: np.ndarray
    link_radius: float = 0.045

    def __post_init__(self):
        self.offsets = np.asarray(self.offsets, dtype=float).reshape(-1, 3)
        self.axes = np.asarray(self.axes, dtype=float).reshape(-1, 3)
        norms = np.linalg.norm(self.axes, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError(f"{self.name}: joint axes must be unit vectors")
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        self.home = np.asarray(self.home, dtype=float)
        n = len(self.axes)
        if not (len(self.offsets) == len(self.lower) == len(self.upper)
                == len(self.home) == n):
            raise ValueError(f"{self.name}: inconsistent chain arrays")
        self._base_mat = np.eye(4)
        self._base_mat[:3, :3] = self.base.rotation
        self._base_mat[:3, 3] = self.base.translation
        self._tool_mat = np.eye(4)
        self._tool_mat[:3, :3] = self.tool.rotation
        self._tool_mat[:3, 3] = self.tool.translation

    @property
    def dof(self) -> int:
        return len(self.axes)

    def fk(self, q: np.ndarray) -> Pose:
        T = _kernels.fk_pose(self._base_mat, self.offsets, self.axes,
                             np.asarray(q, dtype=float), self._tool_mat)
        return Pose(T[:3, :3], T[:3, 3])

    def jacobian(self, q: np.ndarray) -> np.ndarray:
        return _kernels.jacobian(self._base_mat, self.offsets, self.axes,
                                 np.asarray(q, dtype=float), self._tool_mat)

    def points(self, q: np.ndarray) -> np.ndarray:
        return _kernels.chain_points(self._base_mat, self.offsets, self.axes,
                                     np.asarray(q, dtype=float), self._tool_mat)

    def ik_seeds(self, target: Pose) -> np.ndarray:
        """Deterministic seed set: home plus shoulder-bearing/elbow/wrist variants.

        The first joint of every non-home seed is yawed toward the target, which
        puts the damped least-squares iteration in the right basin most of the
        time; the elbow and wrist-roll variants cover the rest.
        """
        d = target.translation - self.base.translation
        bearing = math.atan2(d[1], d[0])
        seeds = [self.home]
        # elbow-up postures (negative shoulder pitch) first: they keep the
        # links clear of the table, which downstream accept() filters prefer
        for q1, q2 in ((-0.6, 1.1), (-0.9, 1.6), (-0.3, 0.6),
                       (0.6, -1.1), (0.9, -1.6), (0.3, -0.6)):
            for q4 in (0.0, 1.57, -1.57):
                s = np.array([bearing, q1, q2, 0.5, q4, 0.0])
                seeds.append(np.clip(s, self.lower, self.upper))
        return np.array(seeds)

    def reach(self) -> float:
        return float(np.sum(np.linalg.norm(self.offsets, axis=1))
                     + np.linalg.norm(self.tool.translation))

    def ik(self, target: Pose, tol_pos: float = 1e-5, tol_rot: float = 1e-4,
           accept=None) -> np.ndarray | None:
        """Damped least-squares IK from deterministic seeds; None if unreachable.

        Different seeds converge to different branches (elbow up/down, wrist
        flips).  With `accept` given, each converged solution is offered to it
        in seed order and the first accepted one is returned — callers use this
        to skip branches whose links would collide.
        """
        base_off = target.translation - self.base.translation
        if np.linalg.norm(base_off) > self.reach():
            return None
        T = np.eye(4)
        T[:3, :3] = target.rotation
        T[:3, 3] = target.translation
        for seed in self.ik_seeds(target):
            q = _kernels.ik_dls(self._base_mat, self.offsets, self.axes,
                                self._tool_mat, self.lower, self.upper, T,
                                seed[None, :], tol_pos=tol_pos, tol_rot=tol_rot)
            if q is None:
                continue
            if accept is None or accept(q):
                return q
        return None


def joint_torques(chain: SerialChain, q: np.ndarray, wrench_at_tcp: np.ndarray) -> np.ndarray:
    """Static joint torques balancing a world wrench applied at the TCP."""
    return chain.jacobian(q).T @ np.asarray(wrench_at_tcp, dtype=float)


@dataclass(frozen=True)
class Capsule:
    p0: np.ndarray
    p1: np.ndarray
    radius: float

    def __post_init__(self):
        a = np.array(self.p0, dtype=float).reshape(3)
        b = np.array(self.p1, dtype=float).reshape(3)
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "p0", a)
        object.__setattr__(self, "p1", b)


@dataclass(frozen=True)
class ObstacleBox:
    pose: Pose
    half: np.ndarray

    def __post_init__(self):
        h = np.array(self.half, dtype=float).reshape(3)
        h.setflags(write=False)
        object.__setattr__(self, "half", h)


@dataclass
class Environment:
    table_height: float = 0.0
    obstacles: list = field(default_factory=list)


# hand body dimensions (meters)
_FINGER_LEN = 0.07
_FINGER_R = 0.008
_BRIDGE_R = 0.012
_BRACKET_LEN = 0.15
_BRACKET_ELEV = math.radians(50.0)  # grip bracket climbs away from the plate
_BRACKET_R = 0.02
_STICK_UNDER_LEN = 0.05
_STICK_R = 0.008
_RISER_LEN = 0.20
_RISER_R = 0.012
_SKIN = 0.002  # finger/stick axes sit radius+skin off the faces they press
CONTACT_EXEMPT_R = 0.015


def _bracket_dir_local() -> np.ndarray:
    return np.array([math.cos(_BRACKET_ELEV), 0.0, math.sin(_BRACKET_ELEV)])


def grip_tool() -> Pose:
    """Flange->TCP transform for the gripper.

    The flange sits at the top of the bracket, looking down it, so the arm
    approaches rim grasps from above instead of skimming the table.
    """
    d = _bracket_dir_local()
    t = np.array([_FINGER_LEN, 0.0, 0.0]) + _BRACKET_LEN * d
    R = np.column_stack([-d, [0.0, 1.0, 0.0], np.cross(-d, [0.0, 1.0, 0.0])])
    return Pose(R, t).inverse()


def push_tool() -> Pose:
    """Flange->TCP transform for the push stick (L-shaped: under-reach + riser)."""
    t = np.array([_STICK_UNDER_LEN, 0.0, _RISER_LEN])
    R = np.column_stack([[0.0, 0.0, -1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]])
    return Pose(R, t).inverse()


def hand_capsules(placement: HandPlacement) -> list:
    """Collision capsules of a hand at a world placement.

    Finger and stick-tip capsules are offset off their contact faces by
    radius+skin: the pad surface touches, the body axis clears.  A capsule
    poking below the table is then exactly a hand that would have to reach
    through it (e.g. the lower gripper jaw under a plate resting flat).
    """
    R = placement.pose.rotation
    x, z = R[:, 0], R[:, 2]
    caps = []
    if placement.hand == GRIP:
        starts = [p - n * (_FINGER_R + _SKIN)
                  for p, n in zip(placement.points, placement.normals)]
        roots = [s + _FINGER_LEN * x for s in starts]
        for s, r in zip(starts, roots):
            caps.append(Capsule(s, r, _FINGER_R))
        caps.append(Capsule(roots[0], roots[1], _BRIDGE_R))
        mid = 0.5 * (roots[0] + roots[1])
        d = math.cos(_BRACKET_ELEV) * x + math.sin(_BRACKET_ELEV) * z
        caps.append(Capsule(mid, mid + _BRACKET_LEN * d, _BRACKET_R))
    else:
        tip = placement.points[0] - placement.normals[0] * (_STICK_R + _SKIN)
        bend = tip + _STICK_UNDER_LEN * x
        caps.append(Capsule(tip, bend, _STICK_R))
        caps.append(Capsule(bend, bend + _RISER_LEN * z, _RISER_R))
    return caps


def arm_capsules(chain: SerialChain, q: np.ndarray) -> list:
    """Capsules along the links, base to flange.

    The final flange->TCP stretch is the hand body, which hand_capsules
    models at its real shape; wrapping it again at link radius would wedge a
    fat phantom link into the contact.
    """
    pts = chain.points(q)[:-1]
    caps = []
    for a, b in zip(pts[:-1], pts[1:]):
        if np.linalg.norm(b - a) > 1e-4:
            caps.append(Capsule(a, b, chain.link_radius))
    return caps


def _capsule_below(c: Capsule, z: float) -> bool:
    return min(c.p0[2], c.p1[2]) - c.radius < z - 1e-9


def _capsule_hits_box(c: Capsule, box: ObstacleBox) -> bool:
    d, _ = _kernels.seg_box_dist(c.p0, c.p1, box.pose.translation,
                                 box.pose.rotation, box.half)
    return d < c.radius


def _capsule_hits_plate(c: Capsule, plate_box: ObstacleBox, exempt_pts: np.ndarray) -> bool:
    d, closest = _kernels.seg_box_dist(c.p0, c.p1, plate_box.pose.translation,
                                       plate_box.pose.rotation, plate_box.half)
    if d >= c.radius:
        return False
    if len(exempt_pts):
        near = np.min(np.linalg.norm(exempt_pts - closest, axis=1))
        if near <= CONTACT_EXEMPT_R:
            return False  # the intended contact patch itself
    return True


@dataclass
class DualArm:
    arms: dict  # hand name ('grip'/'push') -> SerialChain


def clear_of_world(caps: list, plate_box: ObstacleBox, env: Environment,
                   exempt_pts: np.ndarray) -> bool:
    """True when no capsule hits the table, the plate, or an obstacle."""
    for c in caps:
        if _capsule_below(c, env.table_height):
            return False
        if _capsule_hits_plate(c, plate_box, exempt_pts):
            return False
        for ob in env.obstacles:
            if _capsule_hits_box(c, ob):
                return False
    return True


def capsules_cross(set_a: list, set_b: list) -> bool:
    for ca in set_a:
        for cb in set_b:
            if _kernels.seg_seg_dist(ca.p0, ca.p1, cb.p0, cb.p1) \
                    < ca.radius + cb.radius:
                return True
    return False


def geometric_feasible(arms: DualArm, rconf_world: RConf, plate_box: ObstacleBox,
                       env: Environment) -> dict | None:
    """IK for every hand of a world RConf, then the collision gauntlet.

    Returns {hand: joint vector} when every placement is reachable and the
    combined arm+hand geometry is collision free; None otherwise.  Each arm's
    IK filters its own solution branches against the static world (table,
    plate, obstacles) so an elbow-down branch doesn't mask a clear elbow-up
    one; the arm-vs-arm test runs on the surviving pair.
    """
    qs: dict[str, np.ndarray] = {}
    capsule_sets: dict[str, list] = {}
    for p in rconf_world.placements:
        chain = arms.arms[p.hand]
        hand_caps = hand_capsules(p)
        if not clear_of_world(hand_caps, plate_box, env, p.points):
            return None

        def accept(q, _chain=chain, _caps=hand_caps, _pts=p.points):
            return clear_of_world(arm_capsules(_chain, q), plate_box, env, _pts)

        q = chain.ik(p.pose, accept=accept)
        if q is None:
            return None
        qs[p.hand] = q
        capsule_sets[p.hand] = arm_capsules(chain, q) + hand_caps
    names = sorted(capsule_sets)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            if capsules_cross(capsule_sets[a], capsule_sets[b]):
                return None
    return qs


def default_arm(name: str, base: Pose, hand: str = GRIP) -> SerialChain:
    """A generic 6R arm: z-y-y elbow, y-z-y wrist, ~0.79 m reach plus tool."""
    offsets = np.array([
        [0.0, 0.0, 0.25],
        [0.0, 0.0, 0.10],
        [0.35, 0.0, 0.0],
        [0.30, 0.0, 0.0],
        [0.08, 0.0, 0.0],
        [0.06, 0.0, 0.0],
    ])
    axes = np.array([
        [0.0, 0.0, 1.0],
        [0.0, 1.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 1.0, 0.0],
    ])
    lower = np.array([-3.25, -2.5, -2.8, -2.8, -3.25, -2.8])
    upper = -lower
    home = np.array([0.0, 0.6, -1.1, 0.5, 0.0, 0.0])
    tool = grip_tool() if hand == GRIP else push_tool()
    return SerialChain(name, base, offsets, axes, tool, lower, upper, home)


def arms_from_doc(doc: dict) -> DualArm:
    """Builds the dual-arm pair from a JSON description.

    Schema: {"arms": {"grip": {...}, "push": {...}}} where each arm carries
    base position/quaternion, offsets, axes, limits, home, tool, link_radius.
    """
    arms = {}
    for hand, spec in doc["arms"].items():
        if hand not in (GRIP, PUSH):
            raise ValueError(f"unknown hand role {hand!r}")
        base = Pose.from_quat(np.array(spec["base"]["quaternion"]),
                              np.array(spec["base"]["position"]))
        tool = Pose.from_quat(np.array(spec["tool"]["quaternion"]),
                              np.array(spec["tool"]["position"]))
        arms[hand] = SerialChain(
            spec.get("name", hand), base,
            np.array(spec["offsets"]), np.array(spec["axes"]), tool,
            np.array(spec["lower"]), np.array(spec["upper"]),
            np.array(spec["home"]), float(spec.get("link_radius", 0.045)))
    if set(arms) != {GRIP, PUSH}:
        raise ValueError("arm description must define exactly 'grip' and 'push'")
    return DualArm(arms)


def arms_to_doc(arms: DualArm) -> dict:
    out = {}
    for hand, c in arms.arms.items():
        out[hand] = {
            "name": c.name,
            "base": {"position": [float(x) for x in c.base.translation],
                     "quaternion": [float(x) for x in c.base.quat()]},
            "tool": {"position": [float(x) for x in c.tool.translation],
                     "quaternion": [float(x) for x in c.tool.quat()]},
            "offsets": c.offsets.tolist(),
            "axes": c.axes.tolist(),
            "lower": c.lower.tolist(),
            "upper": c.upper.tolist(),
            "home": c.home.tolist(),
            "link_radius": c.link_radius,
        }
    return {"arms": out}
