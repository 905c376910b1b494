"""Grid search over inflated known-free space (8-connected, no corner cutting)."""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from ._kernels import grid_search
from .mapping import FREE, OCCUPIED, OccupancyGrid

SQRT2 = math.sqrt(2.0)


def inflation_kernel(robot_radius: float, cell_size: float) -> np.ndarray:
    """Offsets whose cell square comes closer than ``robot_radius`` to a cell centre."""
    n = int(math.ceil(robot_radius / cell_size)) + 1
    d = np.arange(-n, n + 1)
    dx, dy = np.meshgrid(d, d)
    gx = np.maximum(np.abs(dx) - 0.5, 0.0)
    gy = np.maximum(np.abs(dy) - 0.5, 0.0)
    k = np.hypot(gx, gy) * cell_size < robot_radius
    k[n, n] = True
    return k


def clearance_mask(states: np.ndarray, robot_radius: float, cell_size: float) -> np.ndarray:
    """True where no occupied cell lies within ``robot_radius`` of the cell centre."""
    occ = states == OCCUPIED
    if robot_radius <= 0:
        return ~occ
    return ~ndimage.binary_dilation(occ, structure=inflation_kernel(robot_radius, cell_size))


def traversable(grid: OccupancyGrid, robot_radius: float) -> np.ndarray:
    return (grid.states == FREE) & clearance_mask(grid.states, robot_radius, grid.cell_size)


def _search(trav: np.ndarray, start: tuple[int, int], goal: tuple[int, int] | None):
    """A* to ``goal`` (octile heuristic) or, with ``goal=None``, a full Dijkstra sweep.

    Returns flat ``(cost, parent)`` arrays; cost is in cell units.
    """
    gx, gy = goal if goal is not None else (-1, -1)
    return grid_search(np.ascontiguousarray(trav, dtype=bool), int(start[0]), int(start[1]), int(gx), int(gy))


def shortest_path(grid: OccupancyGrid, start: tuple[int, int], goal: tuple[int, int],
                  robot_radius: float = 0.0, trav: np.ndarray | None = None):
    """Cell path from ``start`` to ``goal`` or None when disconnected."""
    if trav is None:
        trav = traversable(grid, robot_radius)
    sx, sy = start
    if not grid.in_bounds(sx, sy) or not trav[sy, sx]:
        raise ValueError(f"start cell {start} is not free with clearance")
    gx, gy = goal
    if not grid.in_bounds(gx, gy) or not trav[gy, gx]:
        return None
    cost, parent = _search(trav, start, goal)
    w = trav.shape[1]
    g = gy * w + gx
    if math.isinf(cost[g]):
        return None
    path = []
    u = g
    while u != -1:
        path.append((u % w, u // w))
        u = parent[u]
    return path[::-1]


def distance_field(trav: np.ndarray, start: tuple[int, int], cell_size: float = 1.0) -> np.ndarray:
    """Shortest-path cost (m) from ``start`` to every cell; inf where unreachable."""
    cost, _ = _search(trav, start, None)
    return cost.reshape(trav.shape) * cell_size


def path_length(path, cell_size: float) -> float:
    total = 0.0
    for (ax, ay), (bx, by) in zip(path, path[1:]):
        total += SQRT2 if (ax != bx and ay != by) else 1.0
    return total * cell_size


_SNAP_CACHE: dict[int, list[tuple[int, int]]] = {}


def disk_offsets(radius: int) -> list[tuple[int, int]]:
    """Offsets within Euclidean ``radius`` cells, ordered by (distance, dy, dx)."""
    if radius not in _SNAP_CACHE:
        offs = [(dx, dy) for dy in range(-radius, radius + 1) for dx in range(-radius, radius + 1)
                if dx * dx + dy * dy <= radius * radius]
        offs.sort(key=lambda o: (o[0] * o[0] + o[1] * o[1], o[1], o[0]))
        _SNAP_CACHE[radius] = offs
    return _SNAP_CACHE[radius]


def nearest_in_mask(mask: np.ndarray, cell: tuple[int, int], radius: int):
    """Closest True cell within ``radius``; ties go to the smaller (iy, ix)."""
    h, w = mask.shape
    x, y = cell
    for dx, dy in disk_offsets(radius):
        vx, vy = x + dx, y + dy
        if 0 <= vx < w and 0 <= vy < h and mask[vy, vx]:
            return vx, vy
    return None
