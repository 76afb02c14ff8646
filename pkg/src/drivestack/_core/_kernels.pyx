# cython: language_level=3
"""Compiled hot loops: polyline projection and circle-footprint collision."""
import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin, sqrt

cnp.import_array()


def project_points(double[::1] px, double[::1] py,
                   double[::1] wx, double[::1] wy, double[::1] cum_s):
    """Orthogonal projection of each point onto a polyline.

    Returns ``(s, d, dist, seg)``. Ties go to the lowest segment index.
    """
    cdef Py_ssize_t n = px.shape[0]
    cdef Py_ssize_t m = wx.shape[0] - 1
    cdef Py_ssize_t i, j, best_j
    cdef double ax, ay, bx, by, l2, u, fx, fy, ex, ey, d2, best_d2, best_u
    cdef double cross

    s_out = np.empty(n, dtype=np.float64)
    d_out = np.empty(n, dtype=np.float64)
    dist_out = np.empty(n, dtype=np.float64)
    seg_out = np.empty(n, dtype=np.int64)
    cdef double[::1] s_v = s_out
    cdef double[::1] d_v = d_out
    cdef double[::1] dist_v = dist_out
    cdef long long[::1] seg_v = seg_out

    for i in range(n):
        best_d2 = 1e300
        best_j = 0
        best_u = 0.0
        for j in range(m):
            ax = wx[j]
            ay = wy[j]
            bx = wx[j + 1] - ax
            by = wy[j + 1] - ay
            l2 = bx * bx + by * by
            u = ((px[i] - ax) * bx + (py[i] - ay) * by) / l2
            if u < 0.0:
                u = 0.0
            elif u > 1.0:
                u = 1.0
            fx = ax + u * bx
            fy = ay + u * by
            ex = px[i] - fx
            ey = py[i] - fy
            d2 = ex * ex + ey * ey
            if d2 < best_d2:
                best_d2 = d2
                best_j = j
                best_u = u
        j = best_j
        ax = wx[j]
        ay = wy[j]
        bx = wx[j + 1] - ax
        by = wy[j + 1] - ay
        fx = ax + best_u * bx
        fy = ay + best_u * by
        cross = bx * (py[i] - fy) - by * (px[i] - fx)
        dist_v[i] = sqrt(best_d2)
        d_v[i] = dist_v[i] if cross >= 0.0 else -dist_v[i]
        s_v[i] = cum_s[j] + best_u * (cum_s[j + 1] - cum_s[j])
        seg_v[i] = j
    return s_out, d_out, dist_out, seg_out


def collide_batch(double[:, ::1] x, double[:, ::1] y, double[:, ::1] psi,
                  double[::1] t,
                  double[::1] fp_off, double[::1] fp_r,
                  double[::1] ox, double[::1] oy,
                  double[::1] ovx, double[::1] ovy, double[::1] orad,
                  double margin):
    """Flag trajectories whose footprint circles hit any inflated obstacle.

    ``x``, ``y``, ``psi`` are (n_traj, n_pts); obstacles move at constant
    velocity over the times in ``t``.
    """
    cdef Py_ssize_t nt = x.shape[0]
    cdef Py_ssize_t npts = x.shape[1]
    cdef Py_ssize_t nc = fp_off.shape[0]
    cdef Py_ssize_t no = ox.shape[0]
    cdef Py_ssize_t k, p, c, o
    cdef double cp, sp, cx, cy, qx, qy, dx, dy, rr
    cdef bint hit

    out = np.zeros(nt, dtype=np.uint8)
    cdef unsigned char[::1] out_v = out
    if no == 0:
        return out.astype(bool)

    for k in range(nt):
        hit = False
        for p in range(npts):
            cp = cos(psi[k, p])
            sp = sin(psi[k, p])
            for c in range(nc):
                cx = x[k, p] + fp_off[c] * cp
                cy = y[k, p] + fp_off[c] * sp
                for o in range(no):
                    qx = ox[o] + ovx[o] * t[p]
                    qy = oy[o] + ovy[o] * t[p]
                    dx = cx - qx
                    dy = cy - qy
                    rr = fp_r[c] + orad[o] + margin
                    if dx * dx + dy * dy < rr * rr:
                        hit = True
                        break
                if hit:
                    break
            if hit:
                break
        out_v[k] = 1 if hit else 0
    return out.astype(bool)
