"""NumPy implementations of the hot kernels, used when the extension is absent."""
from __future__ import annotations

import numpy as np

# points per chunk in project_points; bounds the (points x segments) temporaries
_CHUNK = 256


def project_points(px, py, wx, wy, cum_s):
    """Orthogonal projection of each point onto a polyline.

    Returns ``(s, d, dist, seg)``. Ties go to the lowest segment index.
    """
    px = np.ascontiguousarray(px, dtype=np.float64)
    py = np.ascontiguousarray(py, dtype=np.float64)
    ax = wx[:-1]
    ay = wy[:-1]
    bx = wx[1:] - ax
    by = wy[1:] - ay
    l2 = bx * bx + by * by
    seg_len = cum_s[1:] - cum_s[:-1]

    n = px.shape[0]
    s_out = np.empty(n)
    d_out = np.empty(n)
    dist_out = np.empty(n)
    seg_out = np.empty(n, dtype=np.int64)
    for lo in range(0, n, _CHUNK):
        qx = px[lo:lo + _CHUNK, None]
        qy = py[lo:lo + _CHUNK, None]
        u = np.clip(((qx - ax) * bx + (qy - ay) * by) / l2, 0.0, 1.0)
        ex = qx - (ax + u * bx)
        ey = qy - (ay + u * by)
        d2 = ex * ex + ey * ey
        # argmin returns the first minimum, i.e. the lowest segment index
        j = np.argmin(d2, axis=1)
        rows = np.arange(j.shape[0])
        uj = u[rows, j]
        best = d2[rows, j]
        cross = bx[j] * ey[rows, j] - by[j] * ex[rows, j]
        dist = np.sqrt(best)
        sl = slice(lo, lo + j.shape[0])
        dist_out[sl] = dist
        d_out[sl] = np.where(cross >= 0.0, dist, -dist)
        s_out[sl] = cum_s[j] + uj * seg_len[j]
        seg_out[sl] = j
    return s_out, d_out, dist_out, seg_out


def collide_batch(x, y, psi, t, fp_off, fp_r, ox, oy, ovx, ovy, orad, margin):
    """Flag trajectories whose footprint circles hit any inflated obstacle.

    ``x``, ``y``, ``psi`` are (n_traj, n_pts); obstacles move at constant
    velocity over the times in ``t``.
    """
    x = np.asarray(x, dtype=np.float64)
    nt = x.shape[0]
    if len(ox) == 0 or nt == 0:
        return np.zeros(nt, dtype=bool)
    cp = np.cos(psi)
    sp = np.sin(psi)
    # obstacle positions per time sample: (n_pts, n_obs)
    qx = ox[None, :] + ovx[None, :] * t[:, None]
    qy = oy[None, :] + ovy[None, :] * t[:, None]
    hit = np.zeros(nt, dtype=bool)
    for off, r in zip(fp_off, fp_r):
        cx = x + off * cp
        cy = y + off * sp
        dx = cx[:, :, None] - qx[None, :, :]
        dy = cy[:, :, None] - qy[None, :, :]
        rr = r + orad + margin
        hit |= (dx * dx + dy * dy < rr * rr).any(axis=(1, 2))
    return hit
