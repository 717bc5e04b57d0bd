"""Hot kernels: compiled/pure parity plus independent numeric oracles."""

from __future__ import annotations

import math

import numpy as np
import pytest

import platelift._kernels as kernels
from platelift._kernels import _pure

try:
    from platelift._kernels import _core
except ImportError:
    _core = None

BACKENDS = [_pure] if _core is None else [_pure, _core]
IDS = ["pure"] if _core is None else ["pure", "core"]


def _random_chain(rng, n=6):
    base = np.eye(4)
    base[:3, 3] = rng.normal(scale=0.2, size=3)
    offsets = rng.normal(scale=0.15, size=(n, 3))
    axes = rng.normal(size=(n, 3))
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    tool = np.eye(4)
    tool[:3, 3] = rng.normal(scale=0.1, size=3)
    q = rng.uniform(-1.5, 1.5, size=n)
    return base, offsets, axes, q, tool


def _rot_axis(axis, angle):
    k = axis / np.linalg.norm(axis)
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + math.sin(angle) * kx + (1 - math.cos(angle)) * kx @ kx


def _fk_oracle(base, offsets, axes, q, tool):
    """4x4 chain product written independently of the kernel code path."""
    T = base.copy()
    for off, ax, qi in zip(offsets, axes, q):
        step = np.eye(4)
        step[:3, 3] = off
        T = T @ step
        spin = np.eye(4)
        spin[:3, :3] = _rot_axis(ax, qi)
        T = T @ spin
    return T @ tool


@pytest.mark.parametrize("backend", BACKENDS, ids=IDS)
def test_fk_matches_homogeneous_product(backend):
    rng = np.random.default_rng(5)
    for _ in range(40):
        base, offsets, axes, q, tool = _random_chain(rng)
        got = backend.fk_pose(base, offsets, axes, q, tool)
        assert np.allclose(got, _fk_oracle(base, offsets, axes, q, tool),
                           atol=1e-10)


@pytest.mark.parametrize("backend", BACKENDS, ids=IDS)
def test_chain_points_end_at_tool(backend):
    rng = np.random.default_rng(9)
    for _ in range(20):
        base, offsets, axes, q, tool = _random_chain(rng)
        pts = backend.chain_points(base, offsets, axes, q, tool)
        assert pts.shape == (len(q) + 1, 3)
        fk = backend.fk_pose(base, offsets, axes, q, tool)
        assert np.allclose(pts[-1], fk[:3, 3], atol=1e-10)


@pytest.mark.parametrize("backend", BACKENDS, ids=IDS)
def test_jacobian_matches_finite_differences(backend):
    rng = np.random.default_rng(13)
    h = 1e-7
    for _ in range(15):
        base, offsets, axes, q, tool = _random_chain(rng)
        J = backend.jacobian(base, offsets, axes, q, tool)
        for i in range(len(q)):
            qp, qm = q.copy(), q.copy()
            qp[i] += h
            qm[i] -= h
            Ep = backend.fk_pose(base, offsets, axes, qp, tool)
            Em = backend.fk_pose(base, offsets, axes, qm, tool)
            lin = (Ep[:3, 3] - Em[:3, 3]) / (2 * h)
            # dR R^T is skew(omega) for small motions
            W = (Ep[:3, :3] - Em[:3, :3]) / (2 * h) @ Em[:3, :3].T
            ang = np.array([W[2, 1], W[0, 2], W[1, 0]])
            assert np.allclose(J[:3, i], lin, atol=1e-5)
            assert np.allclose(J[3:, i], ang, atol=1e-5)


@pytest.mark.parametrize("backend", BACKENDS, ids=IDS)
def test_ik_round_trip(backend):
    rng = np.random.default_rng(17)
    lo = np.full(6, -2.8)
    hi = np.full(6, 2.8)
    hits = 0
    for _ in range(25):
        base, offsets, axes, q, tool = _random_chain(rng)
        target = backend.fk_pose(base, offsets, axes, q, tool)
        seeds = np.vstack([q + rng.normal(scale=0.2, size=6), np.zeros(6)])
        sol = backend.ik_dls(base, offsets, axes, tool, lo, hi, target, seeds)
        if sol is None:
            continue
        hits += 1
        E = backend.fk_pose(base, offsets, axes, sol, tool)
        assert np.linalg.norm(E[:3, 3] - target[:3, 3]) <= 1e-4
        assert np.allclose(E[:3, :3] @ target[:3, :3].T, np.eye(3), atol=1e-3)
        assert np.all(sol >= lo - 1e-12) and np.all(sol <= hi + 1e-12)
    assert hits >= 20  # warm seeds should nearly always converge


@pytest.mark.parametrize("backend", BACKENDS, ids=IDS)
def test_seg_seg_dist_against_sampled_oracle(backend):
    rng = np.random.default_rng(21)
    ts = np.linspace(0.0, 1.0, 241)
    for _ in range(60):
        p0, p1, q0, q1 = rng.normal(scale=1.5, size=(4, 3))
        got = backend.seg_seg_dist(p0, p1, q0, q1)
        a = p0[None] + ts[:, None] * (p1 - p0)
        b = q0[None] + ts[:, None] * (q1 - q0)
        brute = np.linalg.norm(a[:, None] - b[None, :], axis=2).min()
        assert got <= brute + 1e-12  # true minimum can only be lower
        assert got >= brute - 2e-3   # grid resolution bound


def test_seg_seg_dist_known_cases():
    for backend in BACKENDS:
        d = backend.seg_seg_dist(np.array([0.0, 0, 0]), np.array([1.0, 0, 0]),
                                 np.array([0.0, 1, 0]), np.array([1.0, 1, 0]))
        assert math.isclose(d, 1.0, abs_tol=1e-12)
        d = backend.seg_seg_dist(np.array([0.0, 0, 0]), np.array([1.0, 0, 0]),
                                 np.array([0.5, -1, 0]), np.array([0.5, 1, 0]))
        assert math.isclose(d, 0.0, abs_tol=1e-12)
        d = backend.seg_seg_dist(np.array([0.0, 0, 0]), np.array([0.0, 0, 0]),
                                 np.array([3.0, 4, 0]), np.array([3.0, 4, 0]))
        assert math.isclose(d, 5.0, abs_tol=1e-12)


@pytest.mark.parametrize("backend", BACKENDS, ids=IDS)
def test_seg_box_dist_against_sampled_oracle(backend):
    rng = np.random.default_rng(25)
    ts = np.linspace(0.0, 1.0, 481)
    for _ in range(40):
        p0, p1 = rng.normal(scale=1.2, size=(2, 3))
        center = rng.normal(scale=0.5, size=3)
        R = _rot_axis(rng.normal(size=3), rng.uniform(-3, 3))
        half = rng.uniform(0.05, 0.6, size=3)
        got, closest = backend.seg_box_dist(p0, p1, center, R, half)
        # point-to-box distance in box coordinates is exact, so sampling
        # the segment parameter is the only approximation here
        local = (R.T @ (p0[None] + ts[:, None] * (p1 - p0) - center).T).T
        outside = np.maximum(np.abs(local) - half, 0.0)
        brute = np.linalg.norm(outside, axis=1).min()
        assert got <= brute + 1e-12
        assert got >= brute - 2e-3
        lc = R.T @ (np.asarray(closest) - center)
        assert np.all(np.abs(lc) <= half + 1e-9)  # closest point on the box


def test_seg_box_penetration_reports_zero():
    for backend in BACKENDS:
        d, _ = backend.seg_box_dist(np.array([-1.0, 0, 0]),
                                    np.array([1.0, 0, 0]),
                                    np.zeros(3), np.eye(3),
                                    np.array([0.2, 0.2, 0.2]))
        assert d == 0.0


@pytest.mark.skipif(_core is None, reason="compiled backend not built")
def test_backends_agree_bitwise_close():
    """Pure and compiled kernels agree to float round-off on random input."""
    rng = np.random.default_rng(29)
    for _ in range(25):
        base, offsets, axes, q, tool = _random_chain(rng)
        assert np.allclose(_pure.fk_pose(base, offsets, axes, q, tool),
                           _core.fk_pose(base, offsets, axes, q, tool),
                           atol=1e-12)
        assert np.allclose(_pure.jacobian(base, offsets, axes, q, tool),
                           _core.jacobian(base, offsets, axes, q, tool),
                           atol=1e-12)
        assert np.allclose(_pure.chain_points(base, offsets, axes, q, tool),
                           _core.chain_points(base, offsets, axes, q, tool),
                           atol=1e-12)
        p0, p1, q0, q1 = rng.normal(size=(4, 3))
        assert math.isclose(_pure.seg_seg_dist(p0, p1, q0, q1),
                            _core.seg_seg_dist(p0, p1, q0, q1), abs_tol=1e-12)
        center = rng.normal(size=3)
        R = _rot_axis(rng.normal(size=3), rng.uniform(-3, 3))
        half = rng.uniform(0.05, 0.5, size=3)
        dp, cp = _pure.seg_box_dist(p0, p1, center, R, half)
        dc, cc = _core.seg_box_dist(p0, p1, center, R, half)
        assert math.isclose(dp, dc, abs_tol=1e-10)
        assert np.allclose(cp, cc, atol=1e-9)


def test_active_backend_exports():
    assert kernels.BACKEND in ("pure", "core")
    for name in ("fk_pose", "chain_points", "jacobian", "ik_dls",
                 "seg_seg_dist", "seg_box_dist"):
        assert callable(getattr(kernels, name))
