"""Compiled inner loops: grid ray walking, sight-line tests, grid search."""

from __future__ import annotations

import heapq
import math

import numba as nb
import numpy as np

EPS = 1e-9
SQRT2 = math.sqrt(2.0)


@nb.njit(cache=True)
def walk(x0, y0, c, s, length, cs, out_ix, out_iy, out_tin):
    """Cells whose interior the segment from (x0, y0) along (c, s) crosses, up to ``length``.

    Writes cell indices and entry distances; returns the count. Passing exactly
    through a grid corner steps diagonally (the side cells are only touched).
    """
    ix = int(math.floor(x0 / cs))
    iy = int(math.floor(y0 / cs))
    if c > 1e-12:
        step_x = 1
        t_max_x = ((ix + 1) * cs - x0) / c
        t_dx = cs / c
    elif c < -1e-12:
        step_x = -1
        t_max_x = (ix * cs - x0) / c
        t_dx = -cs / c
    else:
        step_x = 0
        t_max_x = np.inf
        t_dx = np.inf
    if s > 1e-12:
        step_y = 1
        t_max_y = ((iy + 1) * cs - y0) / s
        t_dy = cs / s
    elif s < -1e-12:
        step_y = -1
        t_max_y = (iy * cs - y0) / s
        t_dy = -cs / s
    else:
        step_y = 0
        t_max_y = np.inf
        t_dy = np.inf
    n = 0
    t = 0.0
    cap = out_ix.shape[0]
    while n < cap:
        t_next = min(t_max_x, t_max_y)
        if min(t_next, length) - t > EPS or n == 0:
            out_ix[n] = ix
            out_iy[n] = iy
            out_tin[n] = t
            n += 1
        if t_next >= length - EPS:
            break
        if abs(t_max_x - t_max_y) <= EPS:
            ix += step_x
            iy += step_y
            t = t_next
            t_max_x += t_dx
            t_max_y += t_dy
        elif t_max_x < t_max_y:
            ix += step_x
            t = t_max_x
            t_max_x += t_dx
        else:
            iy += step_y
            t = t_max_y
            t_max_y += t_dy
    return n


@nb.njit(cache=True)
def cast_rays(occ, cs, x0, y0, angles, max_range):
    """First occupied-cell entry distance per ray; leaving the grid counts as a hit."""
    h, w = occ.shape
    n_rays = angles.shape[0]
    ranges = np.full(n_rays, max_range)
    hits = np.zeros(n_rays, dtype=np.bool_)
    cap = 2 * int(math.ceil(max_range / cs)) + 4
    bx = np.empty(cap, dtype=np.int64)
    by = np.empty(cap, dtype=np.int64)
    bt = np.empty(cap)
    for k in range(n_rays):
        m = walk(x0, y0, math.cos(angles[k]), math.sin(angles[k]), max_range, cs, bx, by, bt)
        for j in range(m):
            if bx[j] < 0 or by[j] < 0 or bx[j] >= w or by[j] >= h or occ[by[j], bx[j]]:
                ranges[k] = bt[j]
                hits[k] = True
                break
    return ranges, hits


@nb.njit(cache=True)
def mark_rays(states, cs, x0, y0, angles, ranges, hits, free_val, occ_val):
    """Free in every cell a beam crosses completely, occupied in the cell where a return lands.

    Two passes so that occupied wins inside one scan; occupied cells are never freed.
    """
    h, w = states.shape
    n_rays = angles.shape[0]
    cap = 2 * int(math.ceil((ranges.max() + cs) / cs)) + 4
    bx = np.empty(cap, dtype=np.int64)
    by = np.empty(cap, dtype=np.int64)
    bt = np.empty(cap)
    term_x = np.full(n_rays, -1, dtype=np.int64)
    term_y = np.full(n_rays, -1, dtype=np.int64)
    for k in range(n_rays):
        r = ranges[k]
        m = walk(x0, y0, math.cos(angles[k]), math.sin(angles[k]), r + cs, cs, bx, by, bt)
        for j in range(m):
            x, y = bx[j], by[j]
            inb = x >= 0 and y >= 0 and x < w and y < h
            t_out = bt[j + 1] if j + 1 < m else r + cs
            if t_out > r + EPS:
                # the cell holding the beam end: occupied on a return, untouched on a miss
                if hits[k] and inb:
                    term_x[k] = x
                    term_y[k] = y
                break
            if inb and states[y, x] != occ_val:
                states[y, x] = free_val
    for k in range(n_rays):
        if term_x[k] >= 0:
            states[term_y[k], term_x[k]] = occ_val


@nb.njit(cache=True)
def sightlines_clear(occ, interest, vx, vy, dx, dy, shadow_ptr, shadow_idx):
    """Flat indices of table targets that are in bounds, marked in ``interest``, and not shadowed.

    ``shadow_idx[shadow_ptr[i]:shadow_ptr[i + 1]]`` lists the offsets whose sight line
    crosses offset ``i``; each occupied cell in range blocks exactly those.
    """
    h, w = occ.shape
    n = dx.shape[0]
    blocked = np.zeros(n, dtype=np.bool_)
    inb = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        tx = vx + dx[i]
        ty = vy + dy[i]
        if tx < 0 or ty < 0 or tx >= w or ty >= h:
            continue
        inb[i] = True
        if occ[ty, tx]:
            for j in range(shadow_ptr[i], shadow_ptr[i + 1]):
                blocked[shadow_idx[j]] = True
    out = np.empty(n, dtype=np.int64)
    m = 0
    for i in range(n):
        if inb[i] and not blocked[i]:
            ty = vy + dy[i]
            tx = vx + dx[i]
            if interest[ty, tx]:
                out[m] = ty * w + tx
                m += 1
    return out[:m]


@nb.njit(cache=True)
def grid_search(free, sx, sy, gx, gy):
    """A* toward (gx, gy) with the octile heuristic; gx < 0 runs plain Dijkstra to exhaustion.

    8-connected, diagonal steps need both side cells free. Costs are in cell units.
    """
    h, w = free.shape
    n = w * h
    cost = np.full(n, np.inf)
    parent = np.full(n, -1, dtype=np.int64)
    closed = np.zeros(n, dtype=np.bool_)
    s = sy * w + sx
    goal = gy * w + gx if gx >= 0 else -1
    cost[s] = 0.0
    heap = [(0.0, s)]
    mx = np.array([1, -1, 0, 0, 1, 1, -1, -1])
    my = np.array([0, 0, 1, -1, 1, -1, 1, -1])
    while len(heap) > 0:
        _, u = heapq.heappop(heap)
        if closed[u]:
            continue
        closed[u] = True
        if u == goal:
            break
        uy = u // w
        ux = u - uy * w
        cu = cost[u]
        for k in range(8):
            vx = ux + mx[k]
            vy = uy + my[k]
            if vx < 0 or vy < 0 or vx >= w or vy >= h:
                continue
            if not free[vy, vx]:
                continue
            v = vy * w + vx
            if closed[v]:
                continue
            if k >= 4:
                if not (free[uy, vx] and free[vy, ux]):
                    continue
                c = cu + SQRT2
            else:
                c = cu + 1.0
            if c < cost[v]:
                cost[v] = c
                parent[v] = u
                f = c
                if goal >= 0:
                    ax = abs(vx - gx)
                    ay = abs(vy - gy)
                    f += ax + ay + (SQRT2 - 2.0) * min(ax, ay)
                heapq.heappush(heap, (f, v))
    return cost, parent


def warmup():
    """Compile (or load from cache) every kernel on a toy problem."""
    occ = np.zeros((4, 4), dtype=np.bool_)
    ang = np.array([0.0, 1.0])
    r, hit = cast_rays(occ, 1.0, 2.0, 2.0, ang, 3.0)
    st = np.zeros((4, 4), dtype=np.int8)
    mark_rays(st, 1.0, 2.0, 2.0, ang, r, hit, 1, 2)
    z = np.zeros(1, dtype=np.int64)
    sightlines_clear(occ, occ, 1, 1, z, z, np.zeros(2, dtype=np.int64), z)
    grid_search(~occ, 0, 0, 3, 3)
    grid_search(~occ, 0, 0, -1, -1)
