"""Numeric kernels with a compiled core and a pure-numpy fallback.

The compiled extension (`platelift._kernels._core`) is used when it imported
cleanly; otherwise the numpy implementation takes over with identical
semantics.  Set PLATELIFT_PURE=1 to force the fallback.
"""
from __future__ import annotations

import os

from . import _pure

if os.environ.get("PLATELIFT_PURE"):
    _backend = _pure
else:
    try:
        from . import _core as _backend  # type: ignore[no-redef]
    except ImportError:
        _backend = _pure

BACKEND = _backend.NAME

fk_pose = _backend.fk_pose
chain_points = _backend.chain_points
jacobian = _backend.jacobian
ik_dls = _backend.ik_dls
seg_seg_dist = _backend.seg_seg_dist
seg_box_dist = _backend.seg_box_dist

__all__ = ["BACKEND", "fk_pose", "chain_points", "jacobian", "ik_dls",
           "seg_seg_dist", "seg_box_dist"]
