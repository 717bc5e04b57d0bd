"""Hand placement database: grips, pushes, and the suction cup config.

Placements are stored in the plate frame and instantiated into the world at
whatever pose the plate currently has.  A robot configuration (RConf) picks
at most one placement per hand.  The database JSON is self-describing and
validated on load against the plate it claims to fit.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .geometry import Pose, PlateModel

GRIP = "grip"
PUSH = "push"
_SURF_TOL = 1e-9


class GraspDBError(ValueError):
    pass


@dataclass(frozen=True)
class HandPlacement:
    """A tool center pose plus its intended contact points and inward normals.

    Grips carry two fingertip contacts on opposite faces; pushes carry one.
    The TCP x-axis points along the tool body away from the contact (the
    approach direction reversed), which is what the collision model uses.
    """

    placement_id: str
    hand: str
    pose: Pose
    points: np.ndarray   # (k, 3)
    normals: np.ndarray  # (k, 3) unit, pointing into the plate

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1, 3)
        nrm = np.array(self.normals, dtype=float).reshape(-1, 3)
        pts.setflags(write=False)
        nrm.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "normals", nrm)
        if self.hand not in (GRIP, PUSH):
            raise GraspDBError(f"{self.placement_id}: unknown hand {self.hand!r}")
        want = 2 if self.hand == GRIP else 1
        if len(pts) != want or len(nrm) != want:
            raise GraspDBError(f"{self.placement_id}: {self.hand} needs {want} contact(s)")
        for n in nrm:
            if abs(np.linalg.norm(n) - 1.0) > _SURF_TOL:
                raise GraspDBError(f"{self.placement_id}: normal not unit length")
        if self.hand == GRIP and abs(float(nrm[0] @ nrm[1]) + 1.0) > 1e-9:
            raise GraspDBError(f"{self.placement_id}: grip normals must be antiparallel")


def transform_placement(p: HandPlacement, pose: Pose) -> HandPlacement:
    """Re-expresses a placement through `pose` (plate->world or its inverse)."""
    return HandPlacement(p.placement_id, p.hand, pose @ p.pose,
                         pose.transform_point(p.points),
                         pose.transform_direction(p.normals))


@dataclass(frozen=True)
class RConf:
    """A robot configuration: which placement each hand holds (possibly none)."""

    placements: tuple  # HandPlacement, sorted by hand name, at most one per hand

    def __post_init__(self):
        hands = [p.hand for p in self.placements]
        if len(set(hands)) != len(hands):
            raise GraspDBError("at most one placement per hand")
        ordered = tuple(sorted(self.placements, key=lambda p: p.hand))
        object.__setattr__(self, "placements", ordered)

    @property
    def rconf_id(self) -> str:
        if not self.placements:
            return "empty"
        return "+".join(p.placement_id for p in self.placements)

    @property
    def is_empty(self) -> bool:
        return not self.placements

    def placement_ids(self) -> frozenset:
        return frozenset(p.placement_id for p in self.placements)

    def hand(self, name: str) -> HandPlacement | None:
        for p in self.placements:
            if p.hand == name:
                return p
        return None


def rconf_subset(a: RConf, b: RConf) -> bool:
    """True when every placement of `a` appears identically in `b`."""
    return a.placement_ids() <= b.placement_ids()


def to_world(rconf: RConf, plate_pose: Pose) -> RConf:
    return RConf(tuple(transform_placement(p, plate_pose) for p in rconf.placements))


def expand_rconfs(placements: list, include_pairs: bool = True) -> list:
    """The empty configuration, every single placement, and grip+push pairs."""
    out = [RConf(())]
    for p in placements:
        out.append(RConf((p,)))
    if include_pairs:
        grips = [p for p in placements if p.hand == GRIP]
        pushes = [p for p in placements if p.hand == PUSH]
        for g, p in itertools.product(grips, pushes):
            out.append(RConf((g, p)))
    return out


@dataclass(frozen=True)
class SuctionConfig:
    """Vacuum cup: attachment point on the plate's top surface (plate frame)."""

    position: np.ndarray
    pad_radius: float = 0.02
    kappa: float = 40.0   # pad material stiffness (N)
    mu: float = 0.5
    max_force: float = 20.0

    def __post_init__(self):
        p = np.array(self.position, dtype=float).reshape(3)
        p.setflags(write=False)
        object.__setattr__(self, "position", p)
        if self.pad_radius <= 0 or self.max_force <= 0:
            raise GraspDBError("suction pad radius and max force must be positive")

    def validate_on(self, plate: PlateModel):
        hx, hy, hz = plate.half
        x, y, z = self.position
        if abs(z - hz) > _SURF_TOL or abs(x) > hx + _SURF_TOL or abs(y) > hy + _SURF_TOL:
            raise GraspDBError("suction attachment must lie on the plate top surface")

    def world_point(self, plate_pose: Pose) -> np.ndarray:
        return plate_pose.transform_point(self.position)


def _on_surface(plate: PlateModel, p: np.ndarray) -> bool:
    hx, hy, hz = plate.half
    inside = (abs(p[0]) <= hx + _SURF_TOL and abs(p[1]) <= hy + _SURF_TOL
              and abs(p[2]) <= hz + _SURF_TOL)
    pinned = (abs(abs(p[0]) - hx) <= _SURF_TOL or abs(abs(p[1]) - hy) <= _SURF_TOL
              or abs(abs(p[2]) - hz) <= _SURF_TOL)
    return inside and pinned


def load_grasp_db(doc: dict, plate: PlateModel) -> list:
    """Parses and validates a grasp database document against a plate model."""
    echo = doc.get("plate")
    if echo is not None:
        for key, val in (("length", plate.length), ("width", plate.width),
                         ("height", plate.height)):
            if abs(echo[key] - val) > 1e-9:
                raise GraspDBError(f"database was generated for a different plate ({key})")
    seen = set()
    out = []
    for entry in doc["placements"]:
        pid = entry["id"]
        if pid in seen:
            raise GraspDBError(f"duplicate placement id {pid!r}")
        seen.add(pid)
        pose = Pose.from_quat(np.array(entry["pose"]["quaternion"]),
                              np.array(entry["pose"]["position"]))
        p = HandPlacement(pid, entry["hand"], pose,
                          np.array(entry["points"]), np.array(entry["normals"]))
        for pt in p.points:
            if not _on_surface(plate, pt):
                raise GraspDBError(f"{pid}: contact point {pt.tolist()} off the plate surface")
        out.append(p)
    return out


def placement_to_entry(p: HandPlacement) -> dict:
    return {
        "id": p.placement_id,
        "hand": p.hand,
        "pose": {"position": [float(x) for x in p.pose.translation],
                 "quaternion": [float(x) for x in p.pose.quat()]},
        "points": [[float(x) for x in row] for row in p.points],
        "normals": [[float(x) for x in row] for row in p.normals],
    }


_SIDES = (  # edge index -> (outward unit, tangent unit, half-extent picker)
    (np.array([0.0, -1.0, 0.0]), np.array([1.0, 0.0, 0.0])),
    (np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])),
    (np.array([0.0, 1.0, 0.0]), np.array([-1.0, 0.0, 0.0])),
    (np.array([-1.0, 0.0, 0.0]), np.array([0.0, -1.0, 0.0])),
)


def _side_positions(side_len: float, spacing: float, margin: float) -> list:
    span = side_len - 2.0 * margin
    n = max(1, int(math.floor(span / spacing)) + 1) if spacing < span else 1
    if n == 1:
        return [0.0]
    step = span / (n - 1)
    return [-span / 2.0 + k * step for k in range(n)]


def generate_grasp_db(plate: PlateModel, grip_spacing: float = 0.4,
                      push_spacing: float = 0.4, rim_inset: float = 0.02,
                      margin: float = 0.05, push_slant: float = math.radians(20.0)) -> dict:
    """Builds a rim grasp database for a rectangular plate.

    Grips straddle the plate thickness at each side's rim, fingertips
    `rim_inset` inside the edge.  Pushes contact the top and the bottom face
    near each rim, their shafts slanted `push_slant` below/above the face
    plane pointing outward, so a bottom push approaches a barely-raised
    plate from the side instead of through the table.
    """
    hx, hy, hz = plate.half
    half_along = {0: hx, 1: hy, 2: hx, 3: hy}
    ez = np.array([0.0, 0.0, 1.0])
    placements = []

    for ei, (out, tan) in enumerate(_SIDES):
        inner = out * ((hx if abs(out[0]) > 0 else hy) - rim_inset)
        positions = _side_positions(2 * half_along[ei], grip_spacing, margin)
        for k, s in enumerate(positions):
            center = inner + tan * s
            pid = f"g{ei}" if len(positions) == 1 else f"g{ei}_{k}"
            x_axis = out  # tool body points away from the plate
            y_axis = np.cross(ez, x_axis)
            R = np.column_stack([x_axis, y_axis / np.linalg.norm(y_axis), ez])
            pose = Pose(R, center)
            pts = np.array([center + ez * hz, center - ez * hz])
            nrm = np.array([-ez, ez])
            placements.append(HandPlacement(pid, GRIP, pose, pts, nrm))

    for face_name, fz, inward in (("t", +hz, -1.0), ("b", -hz, +1.0)):
        for ei, (out, tan) in enumerate(_SIDES):
            inner = out * ((hx if abs(out[0]) > 0 else hy) - rim_inset)
            positions = _side_positions(2 * half_along[ei], push_spacing, margin)
            for k, s in enumerate(positions):
                point = inner + tan * s + np.array([0.0, 0.0, fz])
                pid = f"p{face_name}{ei}" if len(positions) == 1 else f"p{face_name}{ei}_{k}"
                shaft = out * math.cos(push_slant) - inward * ez * math.sin(push_slant)
                shaft /= np.linalg.norm(shaft)
                # y from plate-up x shaft keeps the TCP z-axis pointing up in
                # the plate frame for both faces: the stick riser runs along it
                y_axis = np.cross(ez, shaft)
                y_axis /= np.linalg.norm(y_axis)
                R = np.column_stack([shaft, y_axis, np.cross(shaft, y_axis)])
                pose = Pose(R, point)
                placements.append(HandPlacement(
                    pid, PUSH, pose, point[None, :],
                    np.array([[0.0, 0.0, inward]])))

    return {
        "plate": {"length": plate.length, "width": plate.width, "height": plate.height},
        "placements": [placement_to_entry(p) for p in placements],
    }
