"""Contact state graphs for a plate on a support plane.

Two layers live here.  The coarse contact state graph (CSG) has one node per
principal contact -- which bottom surface element of the plate touches the
table -- plus a No-Contact node.  The dense contact state graph (DCSG)
samples concrete plate poses for every principal contact and connects poses
that are reachable from one another by a small regrasp-free maneuver.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose, PlateModel, SurfaceElement, bottom_elements, rot_z

NO_CONTACT_LABEL = "none"


@dataclass(frozen=True)
class PrincipalContact:
    """Which plate element rests on which environment element.

    Both ids are None for the No-Contact state (plate airborne on the cup).
    """

    plate_element: str | None
    env_element: str | None

    def __post_init__(self):
        if (self.plate_element is None) != (self.env_element is None):
            raise ValueError("plate and environment element must both be set or both be None")

    @staticmethod
    def no_contact() -> "PrincipalContact":
        return PrincipalContact(None, None)

    @property
    def is_no_contact(self) -> bool:
        return self.plate_element is None

    @property
    def label(self) -> str:
        if self.is_no_contact:
            return NO_CONTACT_LABEL
        return f"{self.plate_element}@{self.env_element}"


def inclusion_related(pc_i: PrincipalContact, pc_j: PrincipalContact,
                      elements: dict) -> bool:
    """True when one principal contact's elements directly bound the other's.

    Both the plate side and the environment side must be inclusion-related;
    the environment side is the same table face for all resting contacts, so
    it is related trivially.  Direct boundary only: a vertex bounds its two
    edges and an edge bounds the face, but a vertex does not bound the face.
    No-Contact is not inclusion-related to anything (the graph builder adds
    its transitions separately).
    """
    if pc_i.is_no_contact or pc_j.is_no_contact:
        return False
    if pc_i.env_element != pc_j.env_element:
        return False
    if pc_i.plate_element == pc_j.plate_element:
        return True
    a = elements[pc_i.plate_element]
    b = elements[pc_j.plate_element]
    return a.element_id in b.bounds or b.element_id in a.bounds


@dataclass
class ContactStateGraph:
    nodes: tuple  # PrincipalContact, face first, then edges, vertices, No-Contact
    adjacency: dict  # label -> frozenset of neighbor labels
    elements: dict  # plate element id -> SurfaceElement (plate frame)

    def neighbors(self, label: str) -> frozenset:
        return self.adjacency[label]


def build_csg(plate: PlateModel, env_element: str = "table") -> ContactStateGraph:
    """Builds the ten-node contact state graph for a plate resting on a table."""
    elements = {e.element_id: e for e in bottom_elements(plate)}
    nodes = [PrincipalContact(eid, env_element) for eid in elements]
    nodes.append(PrincipalContact.no_contact())
    adjacency = {pc.label: set() for pc in nodes}
    for i, pc_i in enumerate(nodes):
        for pc_j in nodes[i + 1:]:
            related = (pc_i.is_no_contact or pc_j.is_no_contact
                       or inclusion_related(pc_i, pc_j, elements))
            if related and pc_i.label != pc_j.label:
                adjacency[pc_i.label].add(pc_j.label)
                adjacency[pc_j.label].add(pc_i.label)
    return ContactStateGraph(tuple(nodes),
                             {k: frozenset(v) for k, v in adjacency.items()},
                             elements)


def classify_contact(plate: PlateModel, pose: Pose, table_height: float = 0.0,
                     tol: float = 1e-6) -> PrincipalContact:
    """Determines the principal contact of a plate pose against the table.

    Raises ValueError if any corner penetrates the table or if the touching
    vertex set does not form a single bottom surface element.
    """
    corners = pose.transform_point(plate.corners())
    if np.min(corners[:, 2]) < table_height - tol:
        raise ValueError("plate penetrates the support plane")
    bottom = pose.transform_point(plate.bottom_corners())
    on = [i for i in range(4) if abs(bottom[i, 2] - table_height) <= tol]
    if len(on) == 0:
        return PrincipalContact.no_contact()
    if len(on) == 4:
        return PrincipalContact("f0", "table")
    if len(on) == 1:
        return PrincipalContact(f"v{on[0]}", "table")
    if len(on) == 2:
        i, j = on
        if (i + 1) % 4 == j:
            return PrincipalContact(f"e{i}", "table")
        if (j + 1) % 4 == i:
            return PrincipalContact(f"e{j}", "table")
        raise ValueError("two diagonal vertices touch: no unique principal contact")
    raise ValueError(f"{len(on)} vertices touch the plane: no unique principal contact")


@dataclass(frozen=True)
class SamplingParams:
    """Pose sampling densities for the DCSG.

    Tilt angles are in radians.  `com_step_threshold` bounds the CoM travel
    of a single same-contact maneuver; `contact_tol` is the geometric
    tolerance for contact classification and shared-element matching.
    """

    face_grid: tuple = (3, 3)
    face_step: float = 0.05
    yaws: tuple = (0.0,)
    edge_tilts: tuple = tuple(math.radians(a) for a in range(10, 81, 10))
    vertex_tilts: tuple = (math.radians(20.0),)
    nc_heights: tuple = (0.12,)
    com_step_threshold: float = 0.10
    contact_tol: float = 1e-6


@dataclass(frozen=True)
class ContactNode:
    """One sampled plate state: a pose realizing a principal contact."""

    node_id: int
    pc: PrincipalContact
    pose: Pose
    com_world: np.ndarray
    tag: str

    def __post_init__(self):
        c = np.array(self.com_world, dtype=float).reshape(3)
        c.setflags(write=False)
        object.__setattr__(self, "com_world", c)


@dataclass
class DenseContactGraph:
    plate: PlateModel
    table_height: float
    nodes: list
    edges: list  # (i, j, 'intra' | 'inter') with i < j
    params: SamplingParams

    def adjacency(self) -> list:
        adj = [[] for _ in self.nodes]
        for i, j, kind in self.edges:
            adj[i].append((j, kind))
            adj[j].append((i, kind))
        return adj

    def nodes_with_pc(self, label: str) -> list:
        return [n for n in self.nodes if n.pc.label == label]


def _tilt_sign(plate: PlateModel, pose: Pose, axis, point) -> float:
    """Chooses the rotation sign about (point, axis) that raises the plate CoM."""
    com_w = pose.transform_point(plate.com)
    lever = com_w - np.asarray(point)
    up = np.cross(np.asarray(axis), lever)[2]
    return 1.0 if up > 0.0 else -1.0


def _edge_tilt_pose(plate: PlateModel, base: Pose, edge_index: int, angle: float) -> Pose:
    verts = base.transform_point(plate.bottom_corners())
    a = verts[edge_index]
    b = verts[(edge_index + 1) % 4]
    axis = b - a
    s = _tilt_sign(plate, base, axis, a)
    return Pose.about_line(axis, a, s * angle) @ base


def _vertex_tilt_pose(plate: PlateModel, base: Pose, vert_index: int, angle: float) -> Pose:
    verts = base.transform_point(plate.bottom_corners())
    v = verts[vert_index]
    opposite = verts[(vert_index + 2) % 4]
    diag = opposite - v
    diag[2] = 0.0
    axis = np.cross([0.0, 0.0, 1.0], diag)
    s = _tilt_sign(plate, base, axis, v)
    return Pose.about_line(axis, v, s * angle) @ base


def sample_dcsg(plate: PlateModel, initial_pose: Pose, params: SamplingParams | None = None,
                table_height: float = 0.0) -> DenseContactGraph:
    """Samples the dense contact state graph anchored at the initial plate pose.

    Face-contact poses form a grid of translations (and optional yaws) around
    the anchor.  Edge and vertex poses tilt the plate about its bottom edges
    and corners at the anchor pose, so the pivot element stays put in the
    world -- which is exactly what makes the shared-element test for
    inter-contact edges succeed.  No-Contact poses are raised copies of the
    face poses.  Every generated pose is validated by `classify_contact`.

    Edges:
      * intra (same principal contact): CoM displacement within
        `com_step_threshold`;
      * inter (adjacent principal contacts): the shared boundary element
        coincides in the world within `contact_tol`, or unconditionally when
        one side is No-Contact.
    """
    params = params or SamplingParams()
    pc0 = classify_contact(plate, initial_pose, table_height, params.contact_tol)
    if pc0.label != "f0@table":
        raise ValueError(f"initial pose must rest on the bottom face, got {pc0.label}")

    csg = build_csg(plate)
    nodes: list[ContactNode] = []
    face_poses: list[Pose] = []

    def add(pose: Pose, tag: str) -> ContactNode:
        pc = classify_contact(plate, pose, table_height, params.contact_tol)
        node = ContactNode(len(nodes), pc, pose,
                           pose.transform_point(plate.com), tag)
        nodes.append(node)
        return node

    nx, ny = params.face_grid
    for iy in range(ny):
        for ix in range(nx):
            dx = (ix - (nx - 1) / 2.0) * params.face_step
            dy = (iy - (ny - 1) / 2.0) * params.face_step
            for yaw in params.yaws:
                pose = Pose(rot_z(yaw) @ initial_pose.rotation,
                            initial_pose.translation + np.array([dx, dy, 0.0]))
                face_poses.append(pose)
                add(pose, f"face:{ix},{iy},{yaw:.3f}")

    anchor = initial_pose
    for ei in range(4):
        for ang in params.edge_tilts:
            add(_edge_tilt_pose(plate, anchor, ei, ang),
                f"edge:e{ei},{math.degrees(ang):.1f}")
    for vi in range(4):
        for ang in params.vertex_tilts:
            add(_vertex_tilt_pose(plate, anchor, vi, ang),
                f"vertex:v{vi},{math.degrees(ang):.1f}")
    for h in params.nc_heights:
        for k, pose in enumerate(face_poses):
            add(Pose(pose.rotation, pose.translation + np.array([0.0, 0.0, h])),
                f"nc:{k},{h:.3f}")

    edges = []
    for i, a in enumerate(nodes):
        for j in range(i + 1, len(nodes)):
            b = nodes[j]
            kind = _edge_between(a, b, plate, csg, params)
            if kind is not None:
                edges.append((i, j, kind))
    return DenseContactGraph(plate, table_height, nodes, edges, params)


def _shared_boundary_element(a: PrincipalContact, b: PrincipalContact, csg) -> str:
    ea = csg.elements[a.plate_element]
    eb = csg.elements[b.plate_element]
    if ea.element_id in eb.bounds:
        return eb.element_id
    return ea.element_id


def _edge_between(a: ContactNode, b: ContactNode, plate: PlateModel,
                  csg, params: SamplingParams) -> str | None:
    if a.pc.label == b.pc.label:
        d = float(np.linalg.norm(a.com_world - b.com_world))
        # the grid example in our docs puts neighbors exactly at the
        # threshold, so the comparison is inclusive
        return "intra" if d <= params.com_step_threshold + 1e-12 else None
    if a.pc.is_no_contact or b.pc.is_no_contact:
        return "inter"
    if a.pc.label not in csg.adjacency[b.pc.label]:
        return None
    shared = _shared_boundary_element(a.pc, b.pc, csg)
    verts = csg.elements[shared].vertices
    wa = a.pose.transform_point(verts)
    wb = b.pose.transform_point(verts)
    if np.max(np.abs(wa - wb)) <= params.contact_tol:
        return "inter"
    return None


def dcsg_to_doc(dcsg: DenseContactGraph) -> dict:
    """JSON-ready summary of a dense contact graph (nodes, edges, counts)."""
    nodes = []
    for n in dcsg.nodes:
        nodes.append({
            "id": n.node_id,
            "pc": n.pc.label,
            "tag": n.tag,
            "position": [float(x) for x in n.pose.translation],
            "quaternion": [float(x) for x in n.pose.quat()],
            "com_world": [float(x) for x in n.com_world],
        })
    counts: dict[str, int] = {}
    for n in dcsg.nodes:
        counts[n.pc.label] = counts.get(n.pc.label, 0) + 1
    return {
        "table_height": dcsg.table_height,
        "nodes": nodes,
        "edges": [[i, j, kind] for i, j, kind in dcsg.edges],
        "pc_counts": dict(sorted(counts.items())),
        "n_nodes": len(dcsg.nodes),
        "n_edges": len(dcsg.edges),
    }


def dcsg_to_text(dcsg: DenseContactGraph) -> str:
    """Plain-text listing, one node per line, then one edge per line."""
    lines = [f"# nodes={len(dcsg.nodes)} edges={len(dcsg.edges)}"]
    for n in dcsg.nodes:
        p = " ".join(f"{x:.6f}" for x in n.pose.translation)
        q = " ".join(f"{x:.6f}" for x in n.pose.quat())
        lines.append(f"node {n.node_id} {n.pc.label} {n.tag} p {p} q {q}")
    for i, j, kind in dcsg.edges:
        lines.append(f"edge {i} {j} {kind}")
    return "\n".join(lines) + "\n"
