"""Static force distribution over a set of plate contacts, as one SOCP.

Every contact contributes a local wrench expressed in its own frame (z along
the direction of positive normal force on the plate).  A per-contact grasp
map lifts local wrenches into the plate's central frame -- taken at the
center of mass with world-aligned axes, so the gravity wrench is exactly
[0, 0, -mg, 0, 0, 0] for any plate orientation.  The program minimizes

    k_gp * f_gp_plus + k_s * f_s_plus

where f_gp_plus bounds every grip/push normal force and f_s_plus bounds the
suction pad's axial pull, subject to equilibrium and per-contact friction
cone constraints:

  * grip contacts: a soft-finger cone with elliptic torsion,
    sqrt(fx^2 + fy^2 + (tz/eps)^2) <= mu * fz, applied per finger pad;
  * push and environment contacts: Coulomb cones, unilateral normals;
  * suction: a linearized limit surface for tangential force and twist
    (sqrt(3)*|fx|, sqrt(3)*|fy| <= mu_s*fz; sqrt(3)*|tz| <= r*mu_s*fz) and
    pad material bounds on bending (sqrt(2)*|tx|, sqrt(2)*|ty| <= pi*r*kappa).

`verify_solution` re-checks a solution against the raw constraint algebra
with plain numpy, independently of the conic solver.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .geometry import skew

try:
    import clarabel
except ImportError:  # pragma: no cover - clarabel is a hard dependency
    clarabel = None

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
SOLVER_ERROR = "solver_error"

# local wrench components each contact kind can exert
_VAR_IDX = {
    "grip": (0, 1, 2, 5),      # fx, fy, fz, tz
    "push": (0, 1, 2),         # fx, fy, fz
    "env": (0, 1, 2),
    "suction": (0, 1, 2, 3, 4, 5),
}


def frame_from_z(z: np.ndarray) -> np.ndarray:
    """Completes a right-handed orthonormal frame (columns x,y,z) around z."""
    z = np.asarray(z, dtype=float)
    z = z / np.linalg.norm(z)
    seed = np.zeros(3)
    seed[int(np.argmin(np.abs(z)))] = 1.0
    x = np.cross(seed, z)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    return np.column_stack([x, y, z])


@dataclass(frozen=True)
class ContactSpec:
    """One contact: frame, kind, and friction/pad parameters.

    `rotation` columns are the contact frame axes in world coordinates; the
    z column is the direction of positive normal force on the plate (for the
    suction pad: the outward top-surface normal it pulls along).
    """

    label: str
    kind: str  # 'grip' | 'push' | 'env' | 'suction'
    position: np.ndarray  # world
    rotation: np.ndarray  # 3x3, columns in world
    mu: float
    eps: float = 0.01        # grip torsion eccentricity (m)
    pad_radius: float = 0.0  # suction only
    kappa: float = 0.0       # suction pad material stiffness (N/m)

    def __post_init__(self):
        if self.kind not in _VAR_IDX:
            raise ValueError(f"unknown contact kind {self.kind!r}")
        p = np.array(self.position, dtype=float).reshape(3)
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        p.setflags(write=False)
        R.setflags(write=False)
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "rotation", R)

    @property
    def n_vars(self) -> int:
        return len(_VAR_IDX[self.kind])


@dataclass(frozen=True)
class Wrench:
    force: np.ndarray
    torque: np.ndarray

    def __post_init__(self):
        f = np.array(self.force, dtype=float).reshape(3)
        t = np.array(self.torque, dtype=float).reshape(3)
        f.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "force", f)
        object.__setattr__(self, "torque", t)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.force, self.torque])


@dataclass(frozen=True)
class ObjectiveWeights:
    k_gp: float = 1.0
    k_s: float = 1.0


@dataclass(frozen=True)
class ForceLimits:
    payload: float = 15.0      # upper bound on f_gp_plus (N per hand contact)
    suction_max: float = 20.0  # upper bound on f_s_plus (N)


def grasp_map(rotation: np.ndarray, position_rel: np.ndarray) -> np.ndarray:
    """6x6 map from a local contact wrench to the central-frame wrench."""
    G = np.zeros((6, 6))
    G[:3, :3] = rotation
    G[3:, :3] = skew(position_rel) @ rotation
    G[3:, 3:] = rotation
    return G


@dataclass
class ForceSystem:
    contacts: list
    mass: float
    com_world: np.ndarray
    gravity: float
    G: np.ndarray       # 6 x (6*n), full per-contact grasp maps
    omega: np.ndarray   # gravity wrench in the central frame

    def contact_G(self, i: int) -> np.ndarray:
        return self.G[:, 6 * i:6 * (i + 1)]


def assemble_system(contacts: list, mass: float, com_world: np.ndarray,
                    gravity: float = 9.81) -> ForceSystem:
    """Stacks per-contact grasp maps about the plate CoM (world-aligned frame)."""
    com_world = np.asarray(com_world, dtype=float).reshape(3)
    n = len(contacts)
    G = np.zeros((6, 6 * n))
    for i, c in enumerate(contacts):
        G[:, 6 * i:6 * (i + 1)] = grasp_map(c.rotation, c.position - com_world)
    omega = np.array([0.0, 0.0, -mass * gravity, 0.0, 0.0, 0.0])
    return ForceSystem(list(contacts), mass, com_world, gravity, G, omega)


@dataclass
class ForceSolution:
    status: str
    objective: float = math.inf
    f_gp_plus: float = 0.0
    f_s_plus: float = 0.0
    wrenches: dict = field(default_factory=dict)  # label -> local Wrench

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE


class _Rows:
    """Incremental builder for the sparse constraint matrix A (s = b - Ax)."""

    def __init__(self, n_x: int):
        self.n_x = n_x
        self.data: list[float] = []
        self.rows: list[int] = []
        self.cols: list[int] = []
        self.b: list[float] = []

    def add(self, coeffs: dict, rhs: float):
        r = len(self.b)
        for col, val in coeffs.items():
            if val != 0.0:
                self.rows.append(r)
                self.cols.append(col)
                self.data.append(float(val))
        self.b.append(float(rhs))

    def matrix(self) -> sp.csc_matrix:
        return sp.csc_matrix((self.data, (self.rows, self.cols)),
                             shape=(len(self.b), self.n_x))


def _variable_layout(contacts: list) -> tuple:
    offsets = []
    k = 0
    for c in contacts:
        offsets.append(k)
        k += c.n_vars
    return offsets, k + 2, k, k + 1  # offsets, n_x, idx f_gp_plus, idx f_s_plus


def solve_socp(system: ForceSystem, weights: ObjectiveWeights | None = None,
               limits: ForceLimits | None = None) -> ForceSolution:
    """Solves the contact force distribution program.

    Returns a ForceSolution whose status is 'feasible', 'infeasible' (the
    solver produced an infeasibility certificate), or 'solver_error' for
    numerical failures -- callers that prune graph nodes must treat the last
    two differently.
    """
    if clarabel is None:  # pragma: no cover
        raise RuntimeError("clarabel is required for solve_socp")
    weights = weights or ObjectiveWeights()
    limits = limits or ForceLimits()
    contacts = system.contacts
    offsets, n_x, i_gp, i_s = _variable_layout(contacts)

    rows = _Rows(n_x)
    cones = []

    # equilibrium: sum_i G_i F_i = -omega     (zero cone)
    for r in range(6):
        coeffs = {}
        for i, c in enumerate(contacts):
            Gi = system.contact_G(i)
            for k, comp in enumerate(_VAR_IDX[c.kind]):
                v = Gi[r, comp]
                if v != 0.0:
                    coeffs[offsets[i] + k] = coeffs.get(offsets[i] + k, 0.0) + v
        rows.add(coeffs, -system.omega[r])
    cones.append(clarabel.ZeroConeT(6))

    # linear inequalities (nonnegative cone): written as a.x <= b
    n_lin_start = len(rows.b)
    for i, c in enumerate(contacts):
        o = offsets[i]
        idx = _VAR_IDX[c.kind]
        z = o + idx.index(2)
        if c.kind in ("grip", "push"):
            rows.add({z: -1.0}, 0.0)                 # fz >= 0
            rows.add({z: 1.0, i_gp: -1.0}, 0.0)      # fz <= f_gp_plus
        elif c.kind == "env":
            rows.add({z: -1.0}, 0.0)                 # fz >= 0
        elif c.kind == "suction":
            fx, fy, fz = o + 0, o + 1, o + 2
            tx, ty, tz = o + 3, o + 4, o + 5
            rows.add({fz: -1.0}, 0.0)                # axial pull >= 0
            rows.add({fz: 1.0, i_s: -1.0}, 0.0)      # axial pull <= f_s_plus
            s3 = math.sqrt(3.0)
            rows.add({fx: s3, fz: -c.mu}, 0.0)       # sqrt3*fx <= mu*fz
            rows.add({fx: -s3, fz: -c.mu}, 0.0)
            rows.add({fy: s3, fz: -c.mu}, 0.0)
            rows.add({fy: -s3, fz: -c.mu}, 0.0)
            r_mu = c.pad_radius * c.mu
            rows.add({tz: s3, fz: -r_mu}, 0.0)       # sqrt3*tz <= r*mu*fz
            rows.add({tz: -s3, fz: -r_mu}, 0.0)
            bend = math.pi * c.pad_radius * c.kappa
            s2 = math.sqrt(2.0)
            rows.add({tx: s2}, bend)                 # sqrt2*tx <= pi*r*kappa
            rows.add({tx: -s2}, bend)
            rows.add({ty: s2}, bend)
            rows.add({ty: -s2}, bend)
    rows.add({i_gp: -1.0}, 0.0)
    rows.add({i_gp: 1.0}, limits.payload)
    rows.add({i_s: -1.0}, 0.0)
    rows.add({i_s: 1.0}, limits.suction_max)
    cones.append(clarabel.NonnegativeConeT(len(rows.b) - n_lin_start))

    # second-order cones: (mu*fz, fx, fy[, tz/eps]) per frictional contact
    for i, c in enumerate(contacts):
        o = offsets[i]
        if c.kind == "grip":
            rows.add({o + 2: -c.mu}, 0.0)
            rows.add({o + 0: -1.0}, 0.0)
            rows.add({o + 1: -1.0}, 0.0)
            rows.add({o + 3: -1.0 / c.eps}, 0.0)
            cones.append(clarabel.SecondOrderConeT(4))
        elif c.kind in ("push", "env"):
            rows.add({o + 2: -c.mu}, 0.0)
            rows.add({o + 0: -1.0}, 0.0)
            rows.add({o + 1: -1.0}, 0.0)
            cones.append(clarabel.SecondOrderConeT(3))

    q = np.zeros(n_x)
    q[i_gp] = weights.k_gp
    q[i_s] = weights.k_s
    P = sp.csc_matrix((n_x, n_x))

    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_gap_abs = 1e-9
    settings.tol_gap_rel = 1e-9
    settings.tol_feas = 1e-9

    solver = clarabel.DefaultSolver(P, q, rows.matrix(), np.array(rows.b),
                                    cones, settings)
    result = solver.solve()
    status = str(result.status)

    if status in ("SolverStatus.Solved", "Solved", "SolverStatus.AlmostSolved", "AlmostSolved"):
        x = np.asarray(result.x)
        wrenches = {}
        for i, c in enumerate(contacts):
            w = np.zeros(6)
            for k, comp in enumerate(_VAR_IDX[c.kind]):
                w[comp] = x[offsets[i] + k]
            wrenches[c.label] = Wrench(w[:3], w[3:])
        return ForceSolution(FEASIBLE, float(result.obj_val),
                             float(x[i_gp]), float(x[i_s]), wrenches)
    if "PrimalInfeasible" in status:
        return ForceSolution(INFEASIBLE)
    return ForceSolution(SOLVER_ERROR)


def world_wrench(contact: ContactSpec, w: Wrench) -> Wrench:
    """Expresses a local contact wrench in world axes (still about the contact)."""
    return Wrench(contact.rotation @ w.force, contact.rotation @ w.torque)


def verify_solution(system: ForceSystem, solution: ForceSolution,
                    tol: float = 1e-6,
                    limits: ForceLimits | None = None) -> dict:
    """Numpy-only re-check of equilibrium and every cone/bound constraint.

    Returns {'ok', 'equilibrium_residual', 'margins'} where each margin is
    constraint slack (>= -tol when satisfied).  Deliberately independent of
    the conic solver: plain arithmetic on the returned wrenches.
    """
    if not solution.feasible:
        raise ValueError("verify_solution needs a feasible solution")
    limits = limits or ForceLimits()
    total = np.zeros(6)
    margins: dict[str, float] = {}
    for i, c in enumerate(system.contacts):
        w = solution.wrenches[c.label]
        total += system.contact_G(i) @ w.as_vector()
        fx, fy, fz = w.force
        tx, ty, tz = w.torque
        m: list[float] = []
        if c.kind == "grip":
            m.append(fz)
            m.append(solution.f_gp_plus - fz)
            m.append(c.mu * fz - math.sqrt(fx * fx + fy * fy + (tz / c.eps) ** 2))
        elif c.kind == "push":
            m.append(fz)
            m.append(solution.f_gp_plus - fz)
            m.append(c.mu * fz - math.hypot(fx, fy))
        elif c.kind == "env":
            m.append(fz)
            m.append(c.mu * fz - math.hypot(fx, fy))
        elif c.kind == "suction":
            m.append(fz)
            m.append(solution.f_s_plus - fz)
            m.append(c.mu * fz - math.sqrt(3.0) * abs(fx))
            m.append(c.mu * fz - math.sqrt(3.0) * abs(fy))
            m.append(c.pad_radius * c.mu * fz - math.sqrt(3.0) * abs(tz))
            bend = math.pi * c.pad_radius * c.kappa
            m.append(bend - math.sqrt(2.0) * abs(tx))
            m.append(bend - math.sqrt(2.0) * abs(ty))
        margins[c.label] = min(m)
    margins["payload"] = limits.payload - solution.f_gp_plus
    margins["suction_max"] = limits.suction_max - solution.f_s_plus
    residual = float(np.max(np.abs(total + system.omega))) if system.contacts \
        else float(np.max(np.abs(system.omega)))
    ok = residual <= tol and all(v >= -tol for v in margins.values())
    return {"ok": ok, "equilibrium_residual": residual, "margins": margins}


def restraint_rank(positions: np.ndarray, normals: np.ndarray,
                   center: np.ndarray, tol: float = 1e-9) -> int:
    """Degree of restraint of a set of environment contacts.

    Stacks one row (n_i^T, ((r_i - center) x n_i)^T) per contact and returns
    the numerical rank: 3 for a face, 2 for an edge, 1 for a vertex, 0 for
    no contact.  Invariant to the choice of center.
    """
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    normals = np.atleast_2d(np.asarray(normals, dtype=float))
    if positions.shape[0] == 0:
        return 0
    rows = []
    for p, n in zip(positions, normals):
        rows.append(np.concatenate([n, np.cross(p - center, n)]))
    T = np.vstack(rows)
    s = np.linalg.svd(T, compute_uv=False)
    return int(np.sum(s > tol * max(T.shape) * s[0])) if s[0] > 0 else 0
