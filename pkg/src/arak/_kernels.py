"""Numba kernels for the hot loops: pairwise polyline crossings and contour walks."""

import math

import numba as nb
import numpy as np


@nb.njit(cache=True)
def _seg_cross(ax, ay, bx, by, cx, cy, dx, dy):
    """Parameters (s, t) of the proper crossing of ab and cd, or (-1, -1)."""
    rx, ry = bx - ax, by - ay
    qx, qy = dx - cx, dy - cy
    den = rx * qy - ry * qx
    if den == 0.0:
        return -1.0, -1.0
    wx, wy = cx - ax, cy - ay
    s = (wx * qy - wy * qx) / den
    t = (wx * ry - wy * rx) / den
    if s < 0.0 or s > 1.0 or t < 0.0 or t > 1.0:
        return -1.0, -1.0
    return s, t


@nb.njit(cache=True)
def first_crossings(seg, owner, n_owner):
    """Earliest (smallest x) crossing for every pair of distinct owners.

    ``seg`` is (m, 4) of x0, y0, x1, y1 with x0 < x1; ``owner`` maps segments
    to particles.  Crossings located exactly at a shared segment endpoint are
    ignored (siblings share their start point).  Returns arrays
    (p, q, x, y) with p < q.
    """
    m = seg.shape[0]
    best_x = np.full((n_owner, n_owner), np.inf)
    best_y = np.zeros((n_owner, n_owner))
    ymin = np.minimum(seg[:, 1], seg[:, 3])
    ymax = np.maximum(seg[:, 1], seg[:, 3])
    order = np.argsort(seg[:, 0], kind="mergesort")
    for ii in range(m):
        i = order[ii]
        for jj in range(ii + 1, m):
            j = order[jj]
            if seg[j, 0] > seg[i, 2]:
                break
            oi, oj = owner[i], owner[j]
            if oi == oj:
                continue
            if ymax[i] < ymin[j] or ymax[j] < ymin[i]:
                continue
            # shared endpoints only arise at a common birth site
            if (seg[i, 0] == seg[j, 0] and seg[i, 1] == seg[j, 1]):
                continue
            # evaluate on the lower owner's segment so the point does not
            # depend on the processing order
            a, b = (i, j) if oi < oj else (j, i)
            s, t = _seg_cross(seg[a, 0], seg[a, 1], seg[a, 2], seg[a, 3],
                              seg[b, 0], seg[b, 1], seg[b, 2], seg[b, 3])
            if s < 0.0:
                continue
            x = seg[a, 0] + s * (seg[a, 2] - seg[a, 0])
            y = seg[a, 1] + s * (seg[a, 3] - seg[a, 1])
            p, q = owner[a], owner[b]
            if x < best_x[p, q]:
                best_x[p, q] = x
                best_y[p, q] = y
    cnt = 0
    for p in range(n_owner):
        for q in range(p + 1, n_owner):
            if best_x[p, q] < np.inf:
                cnt += 1
    P = np.empty(cnt, np.int64)
    Q = np.empty(cnt, np.int64)
    X = np.empty(cnt)
    Y = np.empty(cnt)
    k = 0
    for p in range(n_owner):
        for q in range(p + 1, n_owner):
            if best_x[p, q] < np.inf:
                P[k] = p
                Q[k] = q
                X[k] = best_x[p, q]
                Y[k] = best_y[p, q]
                k += 1
    return P, Q, X, Y


@nb.njit(cache=True)
def _hits_polyline(px, py, n, ax, ay, bx, by, skip_last):
    """Smallest parameter along ab at which it properly crosses the polyline."""
    best = np.inf
    for k in range(n - 1 - skip_last):
        s, t = _seg_cross(ax, ay, bx, by, px[k], py[k], px[k + 1], py[k + 1])
        if s > 0.0 and s < best:
            best = s
    return best


@nb.njit(cache=True)
def contour_walk(x0, y0, theta0, phi_star, exp_buf, ang_buf, disk, cx, cy, r,
                 poly, length_cap, left_kill, max_pts, closing=True):
    """Unit-speed walk with direction updates, killed on self-hit / boundary / cap.

    The loop-closing half-line starts at (x0, y0) with direction angle
    ``theta0 + phi_star``.  ``exp_buf`` holds Exp(1) draws (scaled by 1/4
    here) and ``ang_buf`` the turning angles, consumed in order.  If
    ``left_kill`` the walk dies as soon as it moves strictly left of x0;
    without ``closing`` the half-line is ignored.

    Returns (status, n_pts, xs, ys, used) with status 0 closed, 1 self-hit,
    2 boundary, 3 cap, 4 left-kill, 5 buffer exhausted.  For closed walks
    the last point is the hit point on the half-line.
    """
    xs = np.empty(max_pts)
    ys = np.empty(max_pts)
    xs[0] = x0
    ys[0] = y0
    n = 1
    lx, ly = math.cos(theta0 + phi_star), math.sin(theta0 + phi_star)
    th = theta0
    total = 0.0
    k = 0
    nbuf = exp_buf.shape[0]
    while True:
        if k >= nbuf or n >= max_pts - 1:
            return 5, n, xs, ys, k
        L = exp_buf[k] / 4.0
        cap_hit = False
        if total + L >= length_cap:
            L = length_cap - total
            cap_hit = True
        ax, ay = xs[n - 1], ys[n - 1]
        dx, dy = math.cos(th), math.sin(th)
        bx, by = ax + L * dx, ay + L * dy
        # earliest event along this piece, as a fraction of L
        best = 1.0
        status = 3 if cap_hit else -1
        # boundary exit
        if disk:
            ox, oy = ax - cx, ay - cy
            b = ox * dx + oy * dy
            c = ox * ox + oy * oy - r * r
            ex = -b + math.sqrt(max(b * b - c, 0.0))
        else:
            ex = np.inf
            nv = poly.shape[0]
            for i in range(nv):
                vx, vy = poly[i, 0], poly[i, 1]
                wx, wy = poly[(i + 1) % nv, 0] - vx, poly[(i + 1) % nv, 1] - vy
                num = wx * (ay - vy) - wy * (ax - vx)
                den = wx * dy - wy * dx
                if den < 0.0:
                    tt = -num / den
                    if tt < ex:
                        ex = tt
        if ex / L < best:
            best = ex / L
            status = 2
        # self-hit against all earlier pieces except the adjacent one
        if n >= 3:
            s = _hits_polyline(xs, ys, n - 1, ax, ay, bx, by, 0)
            if s < best:
                best = s
                status = 1
        # loop-closing half-line (skip the very first piece, which starts on it)
        if closing and n >= 2:
            den = dx * ly - dy * lx
            if den != 0.0:
                wx, wy = x0 - ax, y0 - ay
                s = (wx * ly - wy * lx) / den / L
                u = (wx * dy - wy * dx) / den
                if s > 0.0 and s < best and u > 0.0:
                    best = s
                    status = 0
        if left_kill and bx < x0 and best >= (x0 - ax) / (bx - ax):
            # the piece crosses x = x0 before any other event
            status = 4
            best = (x0 - ax) / (bx - ax)
        xs[n] = ax + best * L * dx
        ys[n] = ay + best * L * dy
        n += 1
        total += best * L
        k += 1
        if status >= 0:
            return status, n, xs, ys, k
        th = th + ang_buf[k - 1]
