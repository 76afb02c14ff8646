"""Numerical core routines for projection and collision checking.

The compiled extension ``_kernels`` is used when it was built; otherwise the
NumPy versions in ``_fallback`` take over. Set ``DRIVESTACK_PURE_PYTHON=1`` to
force the fallback.
"""
from __future__ import annotations

import os

import numpy as np

from . import _fallback

BACKEND = "python"
_impl = _fallback
if os.environ.get("DRIVESTACK_PURE_PYTHON") != "1":
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _fallback


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def project_points(px, py, wx, wy, cum_s):
    return _impl.project_points(_f64(px), _f64(py), _f64(wx), _f64(wy), _f64(cum_s))


def collide_batch(x, y, psi, t, fp_off, fp_r, ox, oy, ovx, ovy, orad, margin):
    return _impl.collide_batch(
        _f64(x), _f64(y), _f64(psi), _f64(t), _f64(fp_off), _f64(fp_r),
        _f64(ox), _f64(oy), _f64(ovx), _f64(ovy), _f64(orad), float(margin),
    )


__all__ = ["BACKEND", "project_points", "collide_batch"]
