"""Region partition, status bookkeeping, routing to the nearest exploring region."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .mapping import FREE, UNKNOWN, OccupancyGrid, frontier_mask
from .paths import distance_field, path_length, shortest_path, traversable

UNEXPLORED, EXPLORING, EXPLORED, DORMANT = "unexplored", "exploring", "explored", "dormant"


@dataclass(frozen=True)
class Region:
    rx: int
    ry: int
    cells: tuple[int, int, int, int]  # ix0, iy0, ix1, iy1 (exclusive)
    bounds: tuple[float, float, float, float]  # xmin, ymin, xmax, ymax
    status: str
    known: int = 0

    @property
    def index(self) -> tuple[int, int]:
        return self.rx, self.ry

    @property
    def centroid(self) -> tuple[float, float]:
        x0, y0, x1, y1 = self.bounds
        return 0.5 * (x0 + x1), 0.5 * (y0 + y1)


@dataclass
class GlobalRoute:
    target: tuple[int, int]
    goal: tuple[int, int]
    path: list[tuple[int, int]]
    length: float


def region_cells(cell_size: float, region_size: float) -> int:
    if region_size < 2 * cell_size - 1e-12:
        raise ValueError("region_size must be at least two cells")
    return max(2, int(round(region_size / cell_size)))


def classify_regions(grid: OccupancyGrid, region_size: float, dormant: dict | None = None) -> list[Region]:
    """Status per region from its cells. ``dormant`` maps index -> known-cell count when retired;
    such regions stay dormant while that count is unchanged."""
    n = region_cells(grid.cell_size, region_size)
    h, w = grid.states.shape
    xs = np.arange(0, w, n)
    ys = np.arange(0, h, n)
    unk = (grid.states == UNKNOWN).astype(np.int64)
    unk_counts = np.add.reduceat(np.add.reduceat(unk, ys, axis=0), xs, axis=1)
    cs = grid.cell_size
    ox, oy = grid.origin
    dormant = dormant or {}
    out = []
    for ry, iy0 in enumerate(ys.tolist()):
        iy1 = min(iy0 + n, h)
        for rx, ix0 in enumerate(xs.tolist()):
            ix1 = min(ix0 + n, w)
            total = (iy1 - iy0) * (ix1 - ix0)
            u = int(unk_counts[ry, rx])
            known = total - u
            if u == total:
                status = UNEXPLORED
            elif u == 0:
                status = EXPLORED
            else:
                status = EXPLORING
            if (rx, ry) in dormant and dormant[(rx, ry)] == known and status != EXPLORED:
                status = DORMANT
            bounds = (ox + ix0 * cs, oy + iy0 * cs, ox + ix1 * cs, oy + iy1 * cs)
            out.append(Region(rx, ry, (ix0, iy0, ix1, iy1), bounds, status, known))
    return out


def region_goal(region: Region, grid: OccupancyGrid, reach: np.ndarray):
    """Centroid cell when reachable, else the reachable cell in the region nearest to it."""
    ix0, iy0, ix1, iy1 = region.cells
    cx, cy = grid.cell_of(*region.centroid)
    cx, cy = min(max(cx, ix0), ix1 - 1), min(max(cy, iy0), iy1 - 1)
    if reach[cy, cx]:
        return cx, cy
    sub = reach[iy0:iy1, ix0:ix1]
    iys, ixs = np.nonzero(sub)
    if len(iys) == 0:
        return None
    ixs = ixs + ix0
    iys = iys + iy0
    d2 = (ixs - cx) ** 2 + (iys - cy) ** 2
    k = int(np.lexsort((ixs, iys, d2))[0])
    return int(ixs[k]), int(iys[k])


def pick_target(regions: list[Region], robot: tuple[int, int], grid: OccupancyGrid,
                robot_radius: float = 0.3, trav: np.ndarray | None = None,
                dist: np.ndarray | None = None) -> GlobalRoute | None:
    """Route to the exploring region whose goal cell is path-nearest; ties by (ry, rx)."""
    if trav is None:
        trav = traversable(grid, robot_radius)
    if dist is None:
        dist = distance_field(trav, robot, grid.cell_size)
    reach = np.isfinite(dist)
    best = None
    for r in sorted(regions, key=lambda r: (r.ry, r.rx)):
        if r.status != EXPLORING:
            continue
        goal = region_goal(r, grid, reach)
        if goal is None:
            continue
        d = float(dist[goal[1], goal[0]])
        if best is None or d < best[0]:
            best = (d, r, goal)
    if best is None:
        return None
    _, r, goal = best
    path = shortest_path(grid, robot, goal, trav=trav)
    return GlobalRoute(r.index, goal, path, path_length(path, grid.cell_size))


def live_frontiers(grid: OccupancyGrid, regions: list[Region], region_size: float,
                   reach_free: np.ndarray) -> np.ndarray:
    """Frontier mask restricted to reachable cells bordering unknown space outside dormant regions."""
    fm = frontier_mask(grid) & reach_free
    if not fm.any():
        return fm
    n = region_cells(grid.cell_size, region_size)
    h, w = grid.states.shape
    live_region = np.ones((math.ceil(h / n), math.ceil(w / n)), dtype=bool)
    for r in regions:
        if r.status == DORMANT:
            live_region[r.ry, r.rx] = False
    ys, xs = np.mgrid[0:h, 0:w]
    live_cell = live_region[ys // n, xs // n]
    unk_live = (grid.states == UNKNOWN) & live_cell
    adj = np.zeros_like(unk_live)
    adj[1:, :] |= unk_live[:-1, :]
    adj[:-1, :] |= unk_live[1:, :]
    adj[:, 1:] |= unk_live[:, :-1]
    adj[:, :-1] |= unk_live[:, 1:]
    return fm & adj


def reachable_known_free(grid: OccupancyGrid, cell: tuple[int, int]) -> np.ndarray:
    labels, _ = ndimage.label(grid.states == FREE)
    lab = labels[cell[1], cell[0]]
    if lab == 0:
        return np.zeros_like(labels, dtype=bool)
    return labels == lab


def is_exploration_complete(regions: list[Region], frontiers, grid: OccupancyGrid | None = None) -> bool:
    """No live frontier left and every region explored or retired."""
    has_frontier = bool(np.any(frontiers)) if isinstance(frontiers, np.ndarray) else bool(frontiers)
    return not has_frontier and all(r.status in (EXPLORED, DORMANT) for r in regions)


def dump_regions(regions: list[Region]) -> str:
    return "".join(f"{r.rx} {r.ry} {r.status}\n" for r in sorted(regions, key=lambda r: (r.ry, r.rx)))


def boundary_counts(grid: OccupancyGrid, region_size: float, reach_free: np.ndarray) -> np.ndarray:
    """Per region (ry, rx): unknown cells with a 4-neighbour in ``reach_free``."""
    n = region_cells(grid.cell_size, region_size)
    h, w = grid.states.shape
    near = np.zeros_like(reach_free)
    near[1:, :] |= reach_free[:-1, :]
    near[:-1, :] |= reach_free[1:, :]
    near[:, 1:] |= reach_free[:, :-1]
    near[:, :-1] |= reach_free[:, 1:]
    edge = ((grid.states == UNKNOWN) & near).astype(np.int64)
    return np.add.reduceat(np.add.reduceat(edge, np.arange(0, h, n), axis=0), np.arange(0, w, n), axis=1)


class GlobalPlanner:
    """Owns the dormant set.

    A region records a failed attempt when nothing in it can be reached or observed
    (no reachable goal, or none of its unknown cells borders reachable free space),
    and when it was the previous route target yet none of its cells changed since.
    Any change inside a region resets its count; ``dormant_after`` failures retire it.
    A retired region also wakes when more of its unknown cells come to border
    reachable free space than did at retirement.
    """

    def __init__(self, region_size: float = 10.0, robot_radius: float = 0.3, dormant_after: int = 3):
        self.region_size = region_size
        self.robot_radius = robot_radius
        self.dormant_after = dormant_after
        self.dormant: dict[tuple[int, int], int] = {}
        self.fails: dict[tuple[int, int], int] = {}
        self.seen: dict[tuple[int, int], int] = {}
        self.edge = None
        self.edge_at_retire: dict[tuple[int, int], int] = {}
        self.last_target: tuple[int, int] | None = None
        self.last_known = -1

    def regions(self, grid: OccupancyGrid) -> list[Region]:
        regions = classify_regions(grid, self.region_size, self.dormant)
        for r in regions:
            if self.seen.get(r.index) != r.known:
                self.seen[r.index] = r.known
                self.fails[r.index] = 0
                self.dormant.pop(r.index, None)
        return regions

    def _fail(self, r: Region):
        k = self.fails.get(r.index, 0) + 1
        self.fails[r.index] = k
        if k >= self.dormant_after:
            self.dormant[r.index] = r.known
            self.edge_at_retire[r.index] = int(self.edge[r.ry, r.rx]) if self.edge is not None else 0

    def update(self, grid: OccupancyGrid, robot: tuple[int, int], trav: np.ndarray,
               reach_free: np.ndarray, dist: np.ndarray | None = None):
        """Refresh statuses and count map-based failures. Returns ``(regions, dist)``."""
        regions = self.regions(grid)
        if dist is None:
            dist = distance_field(trav, robot, grid.cell_size)
        reach = np.isfinite(dist)
        edge = self.edge = boundary_counts(grid, self.region_size, reach_free)
        woke = False
        for r in regions:
            if r.status == DORMANT and edge[r.ry, r.rx] > self.edge_at_retire.get(r.index, 0):
                self.dormant.pop(r.index, None)
                self.fails[r.index] = 0
                woke = True
        if woke:
            regions = classify_regions(grid, self.region_size, self.dormant)
        for r in regions:
            if r.status in (EXPLORED, DORMANT):
                continue
            if edge[r.ry, r.rx] == 0:
                self._fail(r)
            elif r.status == EXPLORING and region_goal(r, grid, reach) is None:
                self._fail(r)
        return self.regions(grid), dist

    def route(self, grid: OccupancyGrid, robot: tuple[int, int], trav: np.ndarray,
              regions: list[Region] | None = None, dist: np.ndarray | None = None):
        """Route to the nearest exploring region. Returns ``(route or None, regions)``."""
        if regions is None:
            regions, dist = self.update(grid, robot, trav, reachable_known_free(grid, robot), dist)
        if dist is None:
            dist = distance_field(trav, robot, grid.cell_size)
        by_index = {r.index: r for r in regions}
        if self.last_target is not None and self.last_target in by_index:
            r = by_index[self.last_target]
            if r.known == self.last_known and r.status == EXPLORING:
                self._fail(r)
                regions = self.regions(grid)
        self.last_target = None
        route = pick_target(regions, robot, grid, trav=trav, dist=dist)
        if route is not None:
            self.last_target = route.target
            self.last_known = next(r.known for r in regions if r.index == route.target)
        return route, regions
