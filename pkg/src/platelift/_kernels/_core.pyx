# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled numeric kernels; `_pure.py` is the reference for the semantics.

Same chain convention: T_0 = base; T_{i+1} = T_i * Trans(offset_i) *
Rot(axis_i, q_i); end effector = T_n * tool.  Chains are capped at 32
joints, plenty for serial arms.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport acos, cos, fabs, sin, sqrt

cnp.import_array()

NAME = "core"

cdef enum:
    MAXN = 32


cdef void _rot_axis(const double* axis, double angle, double* R) noexcept nogil:
    cdef double x = axis[0], y = axis[1], z = axis[2]
    cdef double c = cos(angle), s = sin(angle)
    cdef double C = 1.0 - c
    R[0] = c + x * x * C
    R[1] = x * y * C - z * s
    R[2] = x * z * C + y * s
    R[3] = y * x * C + z * s
    R[4] = c + y * y * C
    R[5] = y * z * C - x * s
    R[6] = z * x * C - y * s
    R[7] = z * y * C + x * s
    R[8] = c + z * z * C


cdef void _mat3_mul(const double* A, const double* B, double* out) noexcept nogil:
    cdef int i, j, k
    for i in range(3):
        for j in range(3):
            out[3 * i + j] = 0.0
            for k in range(3):
                out[3 * i + j] += A[3 * i + k] * B[3 * k + j]


cdef void _walk(const double[:, :] base, const double[:, :] offsets,
                const double[:, :] axes, const double[:] q, int n,
                double* R, double* p, double* origins,
                double* waxes) noexcept nogil:
    """Runs the chain; leaves the last joint frame in (R, p).

    When `origins`/`waxes` are non-NULL they receive the joint origins and
    world joint axes along the way (used by the Jacobian and collision
    points).
    """
    cdef int i, r, c
    cdef double step[9]
    cdef double tmp[9]
    cdef double ax[3]
    for r in range(3):
        for c in range(3):
            R[3 * r + c] = base[r, c]
        p[r] = base[r, 3]
    for i in range(n):
        for r in range(3):
            p[r] += (R[3 * r + 0] * offsets[i, 0]
                     + R[3 * r + 1] * offsets[i, 1]
                     + R[3 * r + 2] * offsets[i, 2])
        if origins != NULL:
            for r in range(3):
                origins[3 * i + r] = p[r]
        if waxes != NULL:
            for r in range(3):
                waxes[3 * i + r] = (R[3 * r + 0] * axes[i, 0]
                                    + R[3 * r + 1] * axes[i, 1]
                                    + R[3 * r + 2] * axes[i, 2])
        ax[0] = axes[i, 0]
        ax[1] = axes[i, 1]
        ax[2] = axes[i, 2]
        _rot_axis(ax, q[i], step)
        _mat3_mul(R, step, tmp)
        for r in range(9):
            R[r] = tmp[r]


cdef void _apply_tool(const double* R, const double* p,
                      const double[:, :] tool, double* R_out,
                      double* p_out) noexcept nogil:
    cdef int r, c, k
    for r in range(3):
        p_out[r] = p[r]
        for k in range(3):
            p_out[r] += R[3 * r + k] * tool[k, 3]
        for c in range(3):
            R_out[3 * r + c] = 0.0
            for k in range(3):
                R_out[3 * r + c] += R[3 * r + k] * tool[k, c]


cdef int _chain_len(int n) except -1:
    if n > MAXN:
        raise ValueError("chain too long for the compiled kernels")
    return n


def fk_pose(base, offsets, axes, q, tool):
    cdef const double[:, :] base_v = np.ascontiguousarray(base, dtype=np.float64)
    cdef const double[:, :] off_v = np.ascontiguousarray(offsets, dtype=np.float64)
    cdef const double[:, :] axes_v = np.ascontiguousarray(axes, dtype=np.float64)
    cdef const double[:] q_v = np.ascontiguousarray(q, dtype=np.float64)
    cdef const double[:, :] tool_v = np.ascontiguousarray(tool, dtype=np.float64)
    cdef int n = _chain_len(q_v.shape[0])
    cdef double R[9]
    cdef double p[3]
    cdef double Re[9]
    cdef double pe[3]
    _walk(base_v, off_v, axes_v, q_v, n, R, p, NULL, NULL)
    _apply_tool(R, p, tool_v, Re, pe)
    out = np.eye(4)
    cdef double[:, :] ov = out
    cdef int r, c
    for r in range(3):
        for c in range(3):
            ov[r, c] = Re[3 * r + c]
        ov[r, 3] = pe[r]
    return out


def chain_points(base, offsets, axes, q, tool):
    """Joint origins o_0..o_{n-1} plus the tool point: (n+1, 3)."""
    cdef const double[:, :] base_v = np.ascontiguousarray(base, dtype=np.float64)
    cdef const double[:, :] off_v = np.ascontiguousarray(offsets, dtype=np.float64)
    cdef const double[:, :] axes_v = np.ascontiguousarray(axes, dtype=np.float64)
    cdef const double[:] q_v = np.ascontiguousarray(q, dtype=np.float64)
    cdef const double[:, :] tool_v = np.ascontiguousarray(tool, dtype=np.float64)
    cdef int n = _chain_len(q_v.shape[0])
    cdef double R[9]
    cdef double p[3]
    cdef double origins[3 * MAXN]
    pts = np.zeros((n + 1, 3))
    cdef double[:, :] pv = pts
    cdef int i, r
    _walk(base_v, off_v, axes_v, q_v, n, R, p, origins, NULL)
    for i in range(n):
        for r in range(3):
            pv[i, r] = origins[3 * i + r]
    for r in range(3):
        pv[n, r] = p[r] + (R[3 * r + 0] * tool_v[0, 3]
                           + R[3 * r + 1] * tool_v[1, 3]
                           + R[3 * r + 2] * tool_v[2, 3])
    return pts


cdef void _jacobian_c(const double[:, :] base, const double[:, :] offsets,
                      const double[:, :] axes, const double[:] q, int n,
                      const double[:, :] tool, double* J,
                      double* Re, double* pe) noexcept nogil:
    """J is 6 x n row-major; rows [linear; angular] at the tool point."""
    cdef double R[9]
    cdef double p[3]
    cdef double origins[3 * MAXN]
    cdef double waxes[3 * MAXN]
    cdef double d[3]
    cdef int i, r
    _walk(base, offsets, axes, q, n, R, p, origins, waxes)
    _apply_tool(R, p, tool, Re, pe)
    for i in range(n):
        for r in range(3):
            d[r] = pe[r] - origins[3 * i + r]
        J[0 * n + i] = waxes[3 * i + 1] * d[2] - waxes[3 * i + 2] * d[1]
        J[1 * n + i] = waxes[3 * i + 2] * d[0] - waxes[3 * i + 0] * d[2]
        J[2 * n + i] = waxes[3 * i + 0] * d[1] - waxes[3 * i + 1] * d[0]
        J[3 * n + i] = waxes[3 * i + 0]
        J[4 * n + i] = waxes[3 * i + 1]
        J[5 * n + i] = waxes[3 * i + 2]


def jacobian(base, offsets, axes, q, tool):
    """Geometric Jacobian at the tool point: rows [linear; angular], (6, n)."""
    cdef const double[:, :] base_v = np.ascontiguousarray(base, dtype=np.float64)
    cdef const double[:, :] off_v = np.ascontiguousarray(offsets, dtype=np.float64)
    cdef const double[:, :] axes_v = np.ascontiguousarray(axes, dtype=np.float64)
    cdef const double[:] q_v = np.ascontiguousarray(q, dtype=np.float64)
    cdef const double[:, :] tool_v = np.ascontiguousarray(tool, dtype=np.float64)
    cdef int n = _chain_len(q_v.shape[0])
    cdef double J[6 * MAXN]
    cdef double Re[9]
    cdef double pe[3]
    _jacobian_c(base_v, off_v, axes_v, q_v, n, tool_v, J, Re, pe)
    out = np.zeros((6, n))
    cdef double[:, :] ov = out
    cdef int r, i
    for r in range(6):
        for i in range(n):
            ov[r, i] = J[r * n + i]
    return out


cdef void _rotvec_c(const double* R, double* v) noexcept nogil:
    cdef double c = (R[0] + R[4] + R[8] - 1.0) * 0.5
    cdef double angle, s, norm, best
    cdef double A[9]
    cdef int i, best_i, r
    if c > 1.0:
        c = 1.0
    if c < -1.0:
        c = -1.0
    angle = acos(c)
    if angle < 1e-12:
        v[0] = v[1] = v[2] = 0.0
        return
    if angle > 3.141592653589793 - 1e-6:
        # near pi the sine formula degenerates; recover the axis from
        # the dominant column of (R + I) / 2
        for i in range(9):
            A[i] = R[i] * 0.5
        A[0] += 0.5
        A[4] += 0.5
        A[8] += 0.5
        best_i = 0
        best = A[0]
        if A[4] > best:
            best_i = 1
            best = A[4]
        if A[8] > best:
            best_i = 2
            best = A[8]
        norm = A[4 * best_i]
        if norm < 1e-18:
            norm = 1e-18
        norm = sqrt(norm)
        for r in range(3):
            v[r] = A[3 * r + best_i] / norm
        norm = sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
        for r in range(3):
            v[r] = v[r] / norm * angle
        return
    s = angle / (2.0 * sin(angle))
    v[0] = (R[7] - R[5]) * s
    v[1] = (R[2] - R[6]) * s
    v[2] = (R[3] - R[1]) * s


cdef bint _solve6(double* A, const double* b, double* x) noexcept nogil:
    """Gaussian elimination with partial pivoting on a 6x6 system."""
    cdef double M[6][7]
    cdef int i, j, k, piv
    cdef double best, f
    for i in range(6):
        for j in range(6):
            M[i][j] = A[6 * i + j]
        M[i][6] = b[i]
    for k in range(6):
        piv = k
        best = fabs(M[k][k])
        for i in range(k + 1, 6):
            if fabs(M[i][k]) > best:
                best = fabs(M[i][k])
                piv = i
        if best < 1e-300:
            return False
        if piv != k:
            for j in range(7):
                f = M[k][j]
                M[k][j] = M[piv][j]
                M[piv][j] = f
        for i in range(k + 1, 6):
            f = M[i][k] / M[k][k]
            for j in range(k, 7):
                M[i][j] -= f * M[k][j]
    for k in range(5, -1, -1):
        f = M[k][6]
        for j in range(k + 1, 6):
            f -= M[k][j] * x[j]
        x[k] = f / M[k][k]
    return True


def ik_dls(base, offsets, axes, tool, lo, hi, target, seeds, int iters=200,
           double lam=0.05, double tol_pos=1e-5, double tol_rot=1e-4,
           double step_clamp=0.5):
    """Damped least-squares IK; returns the first converged seed, or None."""
    cdef const double[:, :] base_v = np.ascontiguousarray(base, dtype=np.float64)
    cdef const double[:, :] off_v = np.ascontiguousarray(offsets, dtype=np.float64)
    cdef const double[:, :] axes_v = np.ascontiguousarray(axes, dtype=np.float64)
    cdef const double[:, :] tool_v = np.ascontiguousarray(tool, dtype=np.float64)
    cdef const double[:] lo_v = np.ascontiguousarray(lo, dtype=np.float64)
    cdef const double[:] hi_v = np.ascontiguousarray(hi, dtype=np.float64)
    cdef const double[:, :] tgt_v = np.ascontiguousarray(target, dtype=np.float64)
    cdef const double[:, :] seeds_v = np.ascontiguousarray(seeds, dtype=np.float64)
    cdef int m = seeds_v.shape[0]
    cdef int n = _chain_len(seeds_v.shape[1])

    qbuf = np.zeros(n)
    cdef double[:] q = qbuf
    cdef double dq[MAXN]
    cdef double J[6 * MAXN]
    cdef double JJT[36]
    cdef double e[6]
    cdef double y[6]
    cdef double Re[9]
    cdef double pe[3]
    cdef double Rd[9]
    cdef double ev[3]
    cdef double t_p[3]
    cdef double t_R[9]
    cdef double lam2 = lam * lam
    cdef double en, mx, acc
    cdef int s, it, i, j, k, converged

    for i in range(3):
        t_p[i] = tgt_v[i, 3]
        for j in range(3):
            t_R[3 * i + j] = tgt_v[i, j]

    for s in range(m):
        for i in range(n):
            q[i] = seeds_v[s, i]
            if q[i] < lo_v[i]:
                q[i] = lo_v[i]
            if q[i] > hi_v[i]:
                q[i] = hi_v[i]
        converged = 0
        with nogil:
            for it in range(iters + 1):
                _jacobian_c(base_v, off_v, axes_v, q, n, tool_v, J, Re, pe)
                # orientation error rotvec(R_target @ R_current^T)
                for i in range(3):
                    for j in range(3):
                        acc = 0.0
                        for k in range(3):
                            acc += t_R[3 * i + k] * Re[3 * j + k]
                        Rd[3 * i + j] = acc
                _rotvec_c(Rd, ev)
                for i in range(3):
                    e[i] = t_p[i] - pe[i]
                    e[3 + i] = ev[i]
                en = sqrt(e[0] * e[0] + e[1] * e[1] + e[2] * e[2])
                if en <= tol_pos and sqrt(e[3] * e[3] + e[4] * e[4]
                                          + e[5] * e[5]) <= tol_rot:
                    converged = 1
                    break
                if it == iters:
                    break
                for i in range(6):
                    for j in range(6):
                        acc = 0.0
                        for k in range(n):
                            acc += J[i * n + k] * J[j * n + k]
                        if i == j:
                            acc += lam2
                        JJT[6 * i + j] = acc
                if not _solve6(JJT, e, y):
                    break
                mx = 0.0
                for i in range(n):
                    acc = 0.0
                    for j in range(6):
                        acc += J[j * n + i] * y[j]
                    dq[i] = acc
                    if fabs(acc) > mx:
                        mx = fabs(acc)
                if mx > step_clamp:
                    for i in range(n):
                        dq[i] *= step_clamp / mx
                for i in range(n):
                    q[i] += dq[i]
                    if q[i] < lo_v[i]:
                        q[i] = lo_v[i]
                    if q[i] > hi_v[i]:
                        q[i] = hi_v[i]
        if converged:
            return qbuf.copy()
    return None


def seg_seg_dist(p0, p1, q0, q1):
    """Minimum distance between segments [p0,p1] and [q0,q1]."""
    cdef const double[:] a0 = np.ascontiguousarray(p0, dtype=np.float64)
    cdef const double[:] a1 = np.ascontiguousarray(p1, dtype=np.float64)
    cdef const double[:] b0 = np.ascontiguousarray(q0, dtype=np.float64)
    cdef const double[:] b1 = np.ascontiguousarray(q1, dtype=np.float64)
    cdef double d1[3]
    cdef double d2[3]
    cdef double r[3]
    cdef double a = 0.0, e = 0.0, f = 0.0, c = 0.0, b = 0.0
    cdef double s, t, den, dx, dist2
    cdef int i
    for i in range(3):
        d1[i] = a1[i] - a0[i]
        d2[i] = b1[i] - b0[i]
        r[i] = a0[i] - b0[i]
        a += d1[i] * d1[i]
        e += d2[i] * d2[i]
        f += d2[i] * r[i]
    if a <= 1e-18 and e <= 1e-18:
        return sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2])
    if a <= 1e-18:
        s = 0.0
        t = f / e
        t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
    else:
        for i in range(3):
            c += d1[i] * r[i]
        if e <= 1e-18:
            t = 0.0
            s = -c / a
            s = 0.0 if s < 0.0 else (1.0 if s > 1.0 else s)
        else:
            for i in range(3):
                b += d1[i] * d2[i]
            den = a * e - b * b
            if den > 1e-18:
                s = (b * f - c * e) / den
                s = 0.0 if s < 0.0 else (1.0 if s > 1.0 else s)
            else:
                s = 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = -c / a
                s = 0.0 if s < 0.0 else (1.0 if s > 1.0 else s)
            elif t > 1.0:
                t = 1.0
                s = (b - c) / a
                s = 0.0 if s < 0.0 else (1.0 if s > 1.0 else s)
    dist2 = 0.0
    for i in range(3):
        dx = (a0[i] + s * d1[i]) - (b0[i] + t * d2[i])
        dist2 += dx * dx
    return sqrt(dist2)


cdef double _point_aabb(const double* p, const double* half) noexcept nogil:
    cdef double acc = 0.0, d
    cdef int i
    for i in range(3):
        d = fabs(p[i]) - half[i]
        if d > 0.0:
            acc += d * d
    return sqrt(acc)


def seg_box_dist(p0, p1, center, rot, half):
    """Distance from a segment to an oriented box, plus the closest box point.

    Same ternary-search construction as the reference implementation:
    distance to a convex set is convex along the segment, so 80 thirds
    bracket the minimiser; the endpoints stay in as candidates.
    """
    cdef const double[:] p0v = np.ascontiguousarray(p0, dtype=np.float64)
    cdef const double[:] p1v = np.ascontiguousarray(p1, dtype=np.float64)
    cdef const double[:] cv = np.ascontiguousarray(center, dtype=np.float64)
    cdef const double[:, :] Rv = np.ascontiguousarray(rot, dtype=np.float64)
    cdef const double[:] hv = np.ascontiguousarray(half, dtype=np.float64)
    cdef double a[3]
    cdef double b[3]
    cdef double h[3]
    cdef double pt[3]
    cdef double cp[3]
    cdef double lo_t = 0.0, hi_t = 1.0
    cdef double m1, m2, f1, f2, t, d0, d1, dm, t_best, d_best
    cdef int i, it
    for i in range(3):
        a[i] = (Rv[0, i] * (p0v[0] - cv[0]) + Rv[1, i] * (p0v[1] - cv[1])
                + Rv[2, i] * (p0v[2] - cv[2]))
        b[i] = (Rv[0, i] * (p1v[0] - cv[0]) + Rv[1, i] * (p1v[1] - cv[1])
                + Rv[2, i] * (p1v[2] - cv[2]))
        h[i] = hv[i]
    for it in range(80):
        m1 = lo_t + (hi_t - lo_t) / 3.0
        m2 = hi_t - (hi_t - lo_t) / 3.0
        for i in range(3):
            pt[i] = a[i] + m1 * (b[i] - a[i])
        f1 = _point_aabb(pt, h)
        for i in range(3):
            pt[i] = a[i] + m2 * (b[i] - a[i])
        f2 = _point_aabb(pt, h)
        if f1 <= f2:
            hi_t = m2
        else:
            lo_t = m1
    t = 0.5 * (lo_t + hi_t)
    d0 = _point_aabb(a, h)
    d1 = _point_aabb(b, h)
    for i in range(3):
        pt[i] = a[i] + t * (b[i] - a[i])
    dm = _point_aabb(pt, h)
    t_best = 0.0
    d_best = d0
    if d1 < d_best:
        t_best = 1.0
        d_best = d1
    if dm < d_best:
        t_best = t
        d_best = dm
    for i in range(3):
        cp[i] = a[i] + t_best * (b[i] - a[i])
        if cp[i] < -h[i]:
            cp[i] = -h[i]
        if cp[i] > h[i]:
            cp[i] = h[i]
    out = np.zeros(3)
    cdef double[:] ov = out
    for i in range(3):
        ov[i] = cv[i] + Rv[i, 0] * cp[0] + Rv[i, 1] * cp[1] + Rv[i, 2] * cp[2]
    return d_best, out
