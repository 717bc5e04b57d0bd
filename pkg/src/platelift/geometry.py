"""Rigid-body poses, plate models, and the plate's bottom surface elements.

The plate frame has x along the length l, y along the width w, z along the
thickness h, origin at the geometric center.  The bottom face sits at
z = -h/2 and is the side that rests on the table.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_ORTHO_TOL = 1e-9


def skew(p: np.ndarray) -> np.ndarray:
    """Returns the 3x3 matrix S(p) with S(p) @ v == cross(p, v)."""
    x, y, z = p
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix about a (not necessarily unit) axis."""
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n < 1e-12:
        raise ValueError("rotation axis has near-zero norm")
    k = axis / n
    K = skew(k)
    return np.eye(3) + math.sin(angle) * K + (1.0 - math.cos(angle)) * (K @ K)


def mat_to_quat(R: np.ndarray) -> np.ndarray:
    """Rotation matrix -> unit quaternion (w, x, y, z), w >= 0."""
    t = np.trace(R)
    if t > 0.0:
        s = math.sqrt(t + 1.0) * 2.0
        q = np.array([0.25 * s, (R[2, 1] - R[1, 2]) / s,
                      (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s])
    else:
        i = int(np.argmax(np.diag(R)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = math.sqrt(max(1.0 + R[i, i] - R[j, j] - R[k, k], 0.0)) * 2.0
        q = np.empty(4)
        q[0] = (R[k, j] - R[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (R[j, i] + R[i, j]) / s
        q[1 + k] = (R[k, i] + R[i, k]) / s
    if q[0] < 0.0:
        q = -q
    return q / np.linalg.norm(q)


def quat_to_mat(q: np.ndarray) -> np.ndarray:
    """Unit quaternion (w, x, y, z) -> rotation matrix."""
    w, x, y, z = np.asarray(q, dtype=float) / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


@dataclass(frozen=True)
class Pose:
    """SE(3) pose: p_world = rotation @ p_local + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float)
        t = np.array(self.translation, dtype=float).reshape(3)
        if R.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {R.shape}")
        if not np.all(np.isfinite(R)) or not np.all(np.isfinite(t)):
            raise ValueError("pose contains non-finite entries")
        if np.max(np.abs(R @ R.T - np.eye(3))) > _ORTHO_TOL:
            raise ValueError("rotation is not orthonormal within 1e-9")
        if np.linalg.det(R) < 0.0:
            raise ValueError("rotation is left-handed")
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.eye(3), np.zeros(3))

    @staticmethod
    def from_quat(q: np.ndarray, t: np.ndarray) -> "Pose":
        return Pose(quat_to_mat(q), t)

    @staticmethod
    def about_line(axis: np.ndarray, point: np.ndarray, angle: float) -> "Pose":
        """Rotation by angle about the world line through `point` along `axis`."""
        R = axis_angle(axis, angle)
        point = np.asarray(point, dtype=float)
        return Pose(R, point - R @ point)

    def compose(self, other: "Pose") -> "Pose":
        return Pose(self.rotation @ other.rotation,
                    self.rotation @ other.translation + self.translation)

    def __matmul__(self, other: "Pose") -> "Pose":
        return self.compose(other)

    def inverse(self) -> "Pose":
        return Pose(self.rotation.T, -(self.rotation.T @ self.translation))

    def transform_point(self, p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return p @ self.rotation.T + self.translation

    def transform_direction(self, v: np.ndarray) -> np.ndarray:
        return np.asarray(v, dtype=float) @ self.rotation.T

    def quat(self) -> np.ndarray:
        return mat_to_quat(self.rotation)

    def almost_equal(self, other: "Pose", tol: float = 1e-9) -> bool:
        return (np.max(np.abs(self.rotation - other.rotation)) <= tol
                and np.max(np.abs(self.translation - other.translation)) <= tol)


@dataclass(frozen=True)
class PlateModel:
    """Rectangular plate: edge lengths l x w, thickness h, mass in kg.

    `com` is the center-of-mass offset from the geometric center, in the
    plate frame.  It must lie inside the plate's bounding box.
    """

    length: float
    width: float
    height: float
    mass: float
    com: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        com = np.array(self.com, dtype=float).reshape(3)
        com.setflags(write=False)
        object.__setattr__(self, "com", com)
        for name in ("length", "width", "height", "mass"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"plate {name} must be positive")
        if np.any(np.abs(com) > self.half + 1e-12):
            raise ValueError("center of mass lies outside the plate")

    @property
    def half(self) -> np.ndarray:
        return np.array([self.length / 2.0, self.width / 2.0, self.height / 2.0])

    def bottom_corners(self) -> np.ndarray:
        """The four bottom vertices v0..v3, counterclockwise viewed from above."""
        hx, hy, hz = self.half
        return np.array([
            [-hx, -hy, -hz],
            [+hx, -hy, -hz],
            [+hx, +hy, -hz],
            [-hx, +hy, -hz],
        ])

    def corners(self) -> np.ndarray:
        bottom = self.bottom_corners()
        top = bottom + np.array([0.0, 0.0, self.height])
        return np.vstack([bottom, top])

    def box_inertia(self) -> np.ndarray:
        """Principal moments (diagonal) of the uniform box about its CoM."""
        l, w, h, m = self.length, self.width, self.height, self.mass
        return m / 12.0 * np.array([w * w + h * h, l * l + h * h, l * l + w * w])


@dataclass(frozen=True)
class SurfaceElement:
    """One element of the plate's bottom surface: the face, an edge, or a vertex.

    `bounds` lists the ids of the higher-dimensional elements this one bounds
    (a vertex bounds its two edges, an edge bounds the face, the face nothing),
    so the boundary relation is acyclic by construction.
    """

    element_id: str
    kind: str  # 'face' | 'edge' | 'vertex'
    vertices: np.ndarray  # (k, 3): 4 for face, 2 for edge, 1 for vertex
    normal: np.ndarray  # outward from the plate
    bounds: tuple = ()

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float).reshape(-1, 3)
        n = np.array(self.normal, dtype=float).reshape(3)
        v.setflags(write=False)
        n.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "normal", n)
        expect = {"face": 4, "edge": 2, "vertex": 1}
        if self.kind not in expect:
            raise ValueError(f"unknown element kind {self.kind!r}")
        if len(v) != expect[self.kind]:
            raise ValueError(f"{self.kind} needs {expect[self.kind]} vertices, got {len(v)}")
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise ValueError("element normal must be unit length")

    @property
    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)


def bottom_elements(plate: PlateModel) -> tuple:
    """All nine bottom surface elements: f0, e0..e3, v0..v3.

    e_i joins v_i to v_{(i+1) % 4}; the face is bounded by all four edges,
    each vertex bounds exactly the two edges it terminates.
    """
    v = plate.bottom_corners()
    side_out = [np.array([0.0, -1.0, 0.0]), np.array([1.0, 0.0, 0.0]),
                np.array([0.0, 1.0, 0.0]), np.array([-1.0, 0.0, 0.0])]
    elems = [SurfaceElement("f0", "face", v, np.array([0.0, 0.0, -1.0]))]
    for i in range(4):
        elems.append(SurfaceElement(
            f"e{i}", "edge", v[[i, (i + 1) % 4]], side_out[i], bounds=("f0",)))
    for i in range(4):
        d = side_out[i] + side_out[(i - 1) % 4]
        elems.append(SurfaceElement(
            f"v{i}", "vertex", v[[i]], d / np.linalg.norm(d),
            bounds=(f"e{i}", f"e{(i - 1) % 4}")))
    return tuple(elems)


def transform_element(elem: SurfaceElement, pose: Pose) -> SurfaceElement:
    """Expresses a surface element in the frame `pose` maps into."""
    return SurfaceElement(elem.element_id, elem.kind,
                          pose.transform_point(elem.vertices),
                          pose.transform_direction(elem.normal), elem.bounds)
