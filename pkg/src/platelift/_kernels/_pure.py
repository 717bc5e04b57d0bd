"""Reference numpy implementation of the numeric kernels.

Chain convention: T_0 = base; T_{i+1} = T_i * Trans(offset_i) * Rot(axis_i, q_i);
end effector = T_n * tool.  All matrices are 4x4 homogeneous transforms.
"""
from __future__ import annotations

import math

import numpy as np

NAME = "pure"


def _rot_axis(axis: np.ndarray, angle: float) -> np.ndarray:
    x, y, z = axis
    c, s = math.cos(angle), math.sin(angle)
    C = 1.0 - c
    return np.array([
        [c + x * x * C, x * y * C - z * s, x * z * C + y * s],
        [y * x * C + z * s, c + y * y * C, y * z * C - x * s],
        [z * x * C - y * s, z * y * C + x * s, c + z * z * C],
    ])


def fk_pose(base: np.ndarray, offsets: np.ndarray, axes: np.ndarray,
            q: np.ndarray, tool: np.ndarray) -> np.ndarray:
    T = np.array(base, dtype=float)
    for i in range(len(q)):
        T[:3, 3] += T[:3, :3] @ offsets[i]
        T[:3, :3] = T[:3, :3] @ _rot_axis(axes[i], q[i])
    out = np.eye(4)
    out[:3, :3] = T[:3, :3] @ tool[:3, :3]
    out[:3, 3] = T[:3, :3] @ tool[:3, 3] + T[:3, 3]
    return out


def chain_points(base: np.ndarray, offsets: np.ndarray, axes: np.ndarray,
                 q: np.ndarray, tool: np.ndarray) -> np.ndarray:
    """Joint origins o_0..o_{n-1} plus the tool point: (n+1, 3)."""
    n = len(q)
    pts = np.zeros((n + 1, 3))
    T = np.array(base, dtype=float)
    for i in range(n):
        T[:3, 3] += T[:3, :3] @ offsets[i]
        pts[i] = T[:3, 3]
        T[:3, :3] = T[:3, :3] @ _rot_axis(axes[i], q[i])
    pts[n] = T[:3, :3] @ tool[:3, 3] + T[:3, 3]
    return pts


def jacobian(base: np.ndarray, offsets: np.ndarray, axes: np.ndarray,
             q: np.ndarray, tool: np.ndarray) -> np.ndarray:
    """Geometric Jacobian at the tool point: rows [linear; angular], (6, n)."""
    n = len(q)
    J = np.zeros((6, n))
    T = np.array(base, dtype=float)
    origins = np.zeros((n, 3))
    waxes = np.zeros((n, 3))
    for i in range(n):
        T[:3, 3] += T[:3, :3] @ offsets[i]
        origins[i] = T[:3, 3]
        waxes[i] = T[:3, :3] @ axes[i]
        T[:3, :3] = T[:3, :3] @ _rot_axis(axes[i], q[i])
    p_e = T[:3, :3] @ tool[:3, 3] + T[:3, 3]
    for i in range(n):
        J[:3, i] = np.cross(waxes[i], p_e - origins[i])
        J[3:, i] = waxes[i]
    return J


def _rotvec(R: np.ndarray) -> np.ndarray:
    c = min(1.0, max(-1.0, (R[0, 0] + R[1, 1] + R[2, 2] - 1.0) * 0.5))
    angle = math.acos(c)
    if angle < 1e-12:
        return np.zeros(3)
    if angle > math.pi - 1e-6:
        A = (R + np.eye(3)) * 0.5
        i = int(np.argmax(np.diag(A)))
        axis = A[:, i].copy()
        axis /= math.sqrt(max(A[i, i], 1e-18))
        axis /= np.linalg.norm(axis)
        return axis * angle
    v = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    return v * (angle / (2.0 * math.sin(angle)))


def ik_dls(base: np.ndarray, offsets: np.ndarray, axes: np.ndarray,
           tool: np.ndarray, lo: np.ndarray, hi: np.ndarray,
           target: np.ndarray, seeds: np.ndarray, iters: int = 200,
           lam: float = 0.05, tol_pos: float = 1e-5, tol_rot: float = 1e-4,
           step_clamp: float = 0.5) -> np.ndarray | None:
    """Damped least-squares IK; returns the first converged seed, or None."""
    t_p = target[:3, 3]
    t_R = target[:3, :3]
    lam2 = lam * lam
    for seed in seeds:
        q = np.clip(np.array(seed, dtype=float), lo, hi)
        for _ in range(iters):
            E = fk_pose(base, offsets, axes, q, tool)
            e_pos = t_p - E[:3, 3]
            e_rot = _rotvec(t_R @ E[:3, :3].T)
            if np.linalg.norm(e_pos) <= tol_pos and np.linalg.norm(e_rot) <= tol_rot:
                return q
            J = jacobian(base, offsets, axes, q, tool)
            e = np.concatenate([e_pos, e_rot])
            y = np.linalg.solve(J @ J.T + lam2 * np.eye(6), e)
            dq = J.T @ y
            m = np.max(np.abs(dq))
            if m > step_clamp:
                dq *= step_clamp / m
            q = np.clip(q + dq, lo, hi)
        E = fk_pose(base, offsets, axes, q, tool)
        if (np.linalg.norm(t_p - E[:3, 3]) <= tol_pos
                and np.linalg.norm(_rotvec(t_R @ E[:3, :3].T)) <= tol_rot):
            return q
    return None


def seg_seg_dist(p0: np.ndarray, p1: np.ndarray, q0: np.ndarray, q1: np.ndarray) -> float:
    """Minimum distance between segments [p0,p1] and [q0,q1]."""
    d1 = p1 - p0
    d2 = q1 - q0
    r = p0 - q0
    a = float(d1 @ d1)
    e = float(d2 @ d2)
    f = float(d2 @ r)
    if a <= 1e-18 and e <= 1e-18:
        return float(np.linalg.norm(r))
    if a <= 1e-18:
        s = 0.0
        t = min(1.0, max(0.0, f / e))
    else:
        c = float(d1 @ r)
        if e <= 1e-18:
            t = 0.0
            s = min(1.0, max(0.0, -c / a))
        else:
            b = float(d1 @ d2)
            den = a * e - b * b
            s = min(1.0, max(0.0, (b * f - c * e) / den)) if den > 1e-18 else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = min(1.0, max(0.0, -c / a))
            elif t > 1.0:
                t = 1.0
                s = min(1.0, max(0.0, (b - c) / a))
    closest1 = p0 + s * d1
    closest2 = q0 + t * d2
    return float(np.linalg.norm(closest1 - closest2))


def _point_aabb(p: np.ndarray, half: np.ndarray) -> float:
    d = np.abs(p) - half
    outside = np.maximum(d, 0.0)
    return float(np.linalg.norm(outside))


def seg_box_dist(p0: np.ndarray, p1: np.ndarray, center: np.ndarray,
                 rot: np.ndarray, half: np.ndarray) -> tuple:
    """Distance from a segment to an oriented box, plus the closest box point.

    `rot` columns are the box axes in world coordinates.  Distance to a
    convex set is convex along the segment, so a ternary search over the
    parameter nails the minimum.  Returns (distance, closest_point_world);
    a penetrating segment yields distance 0.0 and the deepest query point.
    """
    R = np.asarray(rot, dtype=float)
    a = R.T @ (np.asarray(p0, dtype=float) - center)
    b = R.T @ (np.asarray(p1, dtype=float) - center)
    half = np.asarray(half, dtype=float)

    lo_t, hi_t = 0.0, 1.0
    for _ in range(80):
        m1 = lo_t + (hi_t - lo_t) / 3.0
        m2 = hi_t - (hi_t - lo_t) / 3.0
        f1 = _point_aabb(a + m1 * (b - a), half)
        f2 = _point_aabb(a + m2 * (b - a), half)
        if f1 <= f2:
            hi_t = m2
        else:
            lo_t = m1
    t = 0.5 * (lo_t + hi_t)
    cand = [(0.0, _point_aabb(a, half)), (1.0, _point_aabb(b, half)),
            (t, _point_aabb(a + t * (b - a), half))]
    t_best, d_best = min(cand, key=lambda c: c[1])
    p_loc = a + t_best * (b - a)
    cp = np.clip(p_loc, -half, half)
    return d_best, R @ cp + center
