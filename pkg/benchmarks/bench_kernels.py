"""Timing comparison of the compiled kernels against the pure-Python port.

Run from the repository root:

    python3 benchmarks/bench_kernels.py [--repeat 2000] [--ik-repeat 50]

Both backends are imported directly, so the PLATELIFT_PURE switch is not
needed here; if the compiled module is missing only the pure column runs.
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from platelift._kernels import _pure

try:
    from platelift._kernels import _core
except ImportError:
    _core = None


def _chain_batch(rng, count, n=6):
    batch = []
    for _ in range(count):
        base = np.eye(4)
        base[:3, 3] = rng.normal(scale=0.2, size=3)
        offsets = rng.normal(scale=0.15, size=(n, 3))
        axes = rng.normal(size=(n, 3))
        axes /= np.linalg.norm(axes, axis=1, keepdims=True)
        tool = np.eye(4)
        tool[:3, 3] = rng.normal(scale=0.1, size=3)
        q = rng.uniform(-1.5, 1.5, size=n)
        batch.append((base, offsets, axes, q, tool))
    return batch


def _segment_batch(rng, count):
    out = []
    for _ in range(count):
        p = rng.normal(scale=1.5, size=(4, 3))
        center = rng.normal(scale=0.5, size=3)
        axis = rng.normal(size=3)
        ang = rng.uniform(-3, 3)
        k = axis / np.linalg.norm(axis)
        kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]],
                       [-k[1], k[0], 0.0]])
        R = np.eye(3) + math.sin(ang) * kx + (1 - math.cos(ang)) * kx @ kx
        half = rng.uniform(0.05, 0.6, size=3)
        out.append((p, center, R, half))
    return out


def _time(fn, repeat):
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=2000,
                    help="iterations per fast kernel (default 2000)")
    ap.add_argument("--ik-repeat", type=int, default=50,
                    help="iterations for the IK benchmark (default 50)")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    chains = _chain_batch(rng, 32)
    segs = _segment_batch(rng, 32)
    lo, hi = np.full(6, -2.8), np.full(6, 2.8)
    ik_cases = []
    for base, offsets, axes, q, tool in chains[:8]:
        target = _pure.fk_pose(base, offsets, axes, q, tool)
        seeds = np.vstack([q + rng.normal(scale=0.3, size=6), np.zeros(6)])
        ik_cases.append((base, offsets, axes, tool, target, seeds))

    def fk(mod):
        for base, offsets, axes, q, tool in chains:
            mod.fk_pose(base, offsets, axes, q, tool)

    def jac(mod):
        for base, offsets, axes, q, tool in chains:
            mod.jacobian(base, offsets, axes, q, tool)

    def pts(mod):
        for base, offsets, axes, q, tool in chains:
            mod.chain_points(base, offsets, axes, q, tool)

    def ik(mod):
        for base, offsets, axes, tool, target, seeds in ik_cases:
            mod.ik_dls(base, offsets, axes, tool, lo, hi, target, seeds)

    def segseg(mod):
        for p, _, _, _ in segs:
            mod.seg_seg_dist(p[0], p[1], p[2], p[3])

    def segbox(mod):
        for p, center, R, half in segs:
            mod.seg_box_dist(p[0], p[1], center, R, half)

    rows = [("fk_pose x32", fk, args.repeat),
            ("jacobian x32", jac, args.repeat),
            ("chain_points x32", pts, args.repeat),
            ("ik_dls x8", ik, args.ik_repeat),
            ("seg_seg_dist x32", segseg, args.repeat),
            ("seg_box_dist x32", segbox, args.repeat)]

    backends = [("pure", _pure)] + ([("core", _core)] if _core else [])
    header = f"{'kernel':<20}" + "".join(f"{name + ' (us)':>14}"
                                         for name, _ in backends)
    if _core:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for label, fn, repeat in rows:
        times = [_time(lambda m=mod: fn(m), repeat) for _, mod in backends]
        line = f"{label:<20}" + "".join(f"{t * 1e6:>14.1f}" for t in times)
        if _core:
            line += f"{times[0] / times[1]:>9.1f}x"
        print(line)
    if not _core:
        print("\ncompiled backend not built; showing the pure column only")


if __name__ == "__main__":
    main()
