"""Frontier viewpoint sampling, visibility gain, greedy coverage and tour ordering."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from ._kernels import sightlines_clear
from .mapping import OCCUPIED, UNKNOWN, FREE, FrontierCell, OccupancyGrid, frontier_mask
from .paths import clearance_mask, nearest_in_mask, path_length, shortest_path, traversable
from .world import Pose, trace_rays

PROJECTION_RADIUS = 5  # cells searched when pushing a frontier sample to a clear cell


@dataclass(frozen=True)
class LocalHorizon:
    center: Pose
    half_side: float

    def contains(self, x: float, y: float) -> bool:
        return abs(x - self.center.x) <= self.half_side and abs(y - self.center.y) <= self.half_side


@dataclass(frozen=True)
class Viewpoint:
    pose: Pose
    cell: tuple[int, int]
    gain: int = 0
    covered: frozenset = frozenset()  # flat indices of visible frontier cells
    unknown: frozenset = frozenset()  # flat indices of visible unknown cells
    source: tuple[int, int] | None = None


@dataclass
class LocalPlan:
    viewpoints: list[Viewpoint]
    path: list[tuple[int, int]]
    length: float
    dropped: list[Viewpoint] = field(default_factory=list)


def default_stride(n_frontiers: int, cap: int = 40) -> int:
    return max(1, math.ceil(n_frontiers / cap))


def sample_viewpoints(grid: OccupancyGrid, frontiers: list[FrontierCell], horizon: LocalHorizon,
                      stride: int = 1, robot_radius: float = 0.3, rng: np.random.Generator | None = None,
                      clear: np.ndarray | None = None) -> list[Viewpoint]:
    """Every ``stride``-th frontier inside the horizon, pushed to the nearest clear free cell.

    With ``rng`` the same number of frontiers is drawn at random instead of by stride.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    inside = [f for f in frontiers if horizon.contains(f.x, f.y)]
    if not inside:
        return []
    if rng is None:
        picked = inside[::stride]
    else:
        k = math.ceil(len(inside) / stride)
        idx = np.sort(rng.choice(len(inside), size=k, replace=False))
        picked = [inside[i] for i in idx]
    if clear is None:
        clear = (grid.states == FREE) & clearance_mask(grid.states, robot_radius, grid.cell_size)
    out = []
    seen = set()
    for f in picked:
        cell = nearest_in_mask(clear, (f.ix, f.iy), PROJECTION_RADIUS)
        if cell is None or cell in seen:
            continue
        seen.add(cell)
        x, y = grid.center_of(*cell)
        heading = math.atan2(f.y - y, f.x - x) if cell != (f.ix, f.iy) else 0.0
        out.append(Viewpoint(Pose(x, y, heading), cell, source=(f.ix, f.iy)))
    return out


@lru_cache(maxsize=8)
def visibility_table(radius_cells: float):
    """Cell offsets within range and, per offset, the offsets whose sight line it blocks.

    Sight lines run centre to centre; a cell blocks only if the line crosses its interior.
    """
    r = int(math.floor(radius_cells))
    d = np.arange(-r, r + 1)
    dx, dy = np.meshgrid(d, d)
    keep = (dx * dx + dy * dy <= radius_cells * radius_cells) & ((dx != 0) | (dy != 0))
    dx, dy = dx[keep], dy[keep]
    order = np.lexsort((dx, dy, dx * dx + dy * dy))
    dx, dy = dx[order], dy[order]
    ang = np.arctan2(dy, dx)
    lengths = np.hypot(dx, dy)
    ix, iy, _, _, valid = trace_rays(0.5, 0.5, ang, lengths, 1.0)
    inter = valid & ~((ix == 0) & (iy == 0)) & ~((ix == dx[:, None]) & (iy == dy[:, None]))
    lookup = np.full((2 * r + 1, 2 * r + 1), -1, dtype=np.int64)
    lookup[dy + r, dx + r] = np.arange(len(dx))
    blocker = lookup[iy[inter] + r, ix[inter] + r]
    assert (blocker >= 0).all()
    target = np.nonzero(inter)[0]
    # invert target -> blockers into blocker -> shadowed targets
    by_blocker = np.argsort(blocker, kind="stable")
    shadow_idx = target[by_blocker]
    shadow_ptr = np.concatenate([[0], np.cumsum(np.bincount(blocker, minlength=len(dx)))])
    return dx, dy, shadow_ptr, shadow_idx


def visible_cells(grid: OccupancyGrid, cell: tuple[int, int], sensor_range: float,
                  interest: np.ndarray | None = None):
    """Flat indices of in-range cells whose sight line from ``cell`` crosses no occupied cell.

    ``interest`` limits the check to cells marked True.
    """
    dx, dy, shadow_ptr, shadow_idx = visibility_table(sensor_range / grid.cell_size)
    vx, vy = cell
    occ = grid.states == OCCUPIED
    if interest is None:
        interest = np.ones_like(occ)
    return sightlines_clear(occ, interest, int(vx), int(vy), dx, dy, shadow_ptr, shadow_idx)


def evaluate_gain(grid: OccupancyGrid, vp: Pose | tuple[int, int], sensor_range: float,
                  frontiers: np.ndarray | None = None):
    """Return ``(gain, covered, unknown)`` for a viewpoint.

    ``gain`` counts visible unknown cells, ``covered`` holds visible frontier cells.
    """
    cell = vp if isinstance(vp, tuple) else grid.cell_of(vp.x, vp.y)
    if not grid.in_bounds(*cell) or grid.states[cell[1], cell[0]] != FREE:
        raise ValueError(f"viewpoint cell {cell} is not free")
    if frontiers is None:
        frontiers = frontier_mask(grid)
    vis = visible_cells(grid, cell, sensor_range, (grid.states == UNKNOWN) | frontiers)
    flat_states = grid.states.ravel()
    unknown = vis[flat_states[vis] == UNKNOWN]
    covered = vis[frontiers.ravel()[vis]]
    f_self = cell[1] * grid.width + cell[0]
    if frontiers[cell[1], cell[0]]:
        covered = np.append(covered, f_self)
    return len(unknown), frozenset(covered.tolist()), frozenset(unknown.tolist())


def with_gain(grid: OccupancyGrid, vp: Viewpoint, sensor_range: float, frontiers=None) -> Viewpoint:
    gain, covered, unknown = evaluate_gain(grid, vp.cell, sensor_range, frontiers)
    return replace(vp, gain=gain, covered=covered, unknown=unknown)


def select_viewpoints(candidates: list[Viewpoint], min_gain: int = 5) -> list[Viewpoint]:
    """Greedy max-coverage over visible unknown cells."""
    all_frontier = frozenset().union(*(c.covered for c in candidates)) if candidates else frozenset()
    seen_unknown: set = set()
    seen_frontier: set = set()
    chosen: list[int] = []
    remaining = list(range(len(candidates)))
    while remaining:
        best, best_gain = -1, -1
        for i in remaining:
            g = len(candidates[i].unknown - seen_unknown) if seen_unknown else len(candidates[i].unknown)
            if g > best_gain:
                best, best_gain = i, g
        if best_gain < min_gain:
            break
        chosen.append(best)
        remaining.remove(best)
        seen_unknown |= candidates[best].unknown
        seen_frontier |= candidates[best].covered
        if all_frontier and seen_frontier >= all_frontier:
            break
    return [candidates[i] for i in chosen]


def _open_tour_length(order, dist) -> float:
    return sum(dist[a][b] for a, b in zip(order, order[1:]))


def two_opt(order: list[int], dist) -> list[int]:
    """Improve an open tour with a fixed first node until no 2-swap helps."""
    order = list(order)
    n = len(order)
    improved = True
    while improved:
        improved = False
        for i in range(1, n - 1):
            for j in range(i + 1, n):
                a, b = order[i - 1], order[i]
                c = order[j]
                delta = dist[a][c] - dist[a][b]
                if j + 1 < n:
                    d = order[j + 1]
                    delta += dist[b][d] - dist[c][d]
                if delta < -1e-9:
                    order[i:j + 1] = order[i:j + 1][::-1]
                    improved = True
    return order


def nearest_neighbor(dist, n: int) -> list[int]:
    order = [0]
    left = set(range(1, n))
    while left:
        u = order[-1]
        nxt = min(left, key=lambda v: (dist[u][v], v))
        order.append(nxt)
        left.remove(nxt)
    return order


def order_tour(start: tuple[int, int], selected: list[Viewpoint], grid: OccupancyGrid,
               robot_radius: float = 0.3, trav: np.ndarray | None = None) -> LocalPlan:
    """Nearest-neighbour seed, 2-opt refinement, A* legs stitched into one cell path."""
    if trav is None:
        trav = traversable(grid, robot_radius)
    kept, dropped, legs0 = [], [], []
    for vp in selected:
        p = shortest_path(grid, start, vp.cell, trav=trav)
        if p is None:
            dropped.append(vp)
        else:
            kept.append(vp)
            legs0.append(p)
    if not kept:
        return LocalPlan([], [start], 0.0, dropped)
    n = len(kept) + 1
    cells = [start] + [vp.cell for vp in kept]
    dist = [[0.0] * n for _ in range(n)]
    legs: dict[tuple[int, int], list] = {}
    for j in range(1, n):
        legs[(0, j)] = legs0[j - 1]
        dist[0][j] = dist[j][0] = path_length(legs0[j - 1], grid.cell_size)
    for i in range(1, n):
        for j in range(i + 1, n):
            p = shortest_path(grid, cells[i], cells[j], trav=trav)
            legs[(i, j)] = p
            dist[i][j] = dist[j][i] = path_length(p, grid.cell_size)
    order = two_opt(nearest_neighbor(dist, n), dist)
    path = [start]
    for a, b in zip(order, order[1:]):
        leg = legs[(a, b)] if (a, b) in legs else legs[(b, a)][::-1]
        path.extend(leg[1:])
    return LocalPlan([kept[i - 1] for i in order[1:]], path, _open_tour_length(order, dist), dropped)
