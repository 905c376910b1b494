"""Tri-state occupancy map, frontier extraction and coverage accounting."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ._kernels import mark_rays
from .world import LidarScan, WorldGrid

UNKNOWN, FREE, OCCUPIED = 0, 1, 2

_CHARS = {UNKNOWN: "?", FREE: ".", OCCUPIED: "#"}
_STATES = {v: k for k, v in _CHARS.items()}


@dataclass
class OccupancyGrid:
    states: np.ndarray  # int8, indexed [iy, ix]
    cell_size: float
    origin: tuple[float, float] = (0.0, 0.0)

    @classmethod
    def empty(cls, width: int, height: int, cell_size: float, origin=(0.0, 0.0)) -> "OccupancyGrid":
        return cls(np.full((height, width), UNKNOWN, dtype=np.int8), cell_size, origin)

    @classmethod
    def like(cls, world: WorldGrid) -> "OccupancyGrid":
        return cls.empty(world.width, world.height, world.cell_size)

    @property
    def width(self) -> int:
        return self.states.shape[1]

    @property
    def height(self) -> int:
        return self.states.shape[0]

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        return (math.floor((x - self.origin[0]) / self.cell_size),
                math.floor((y - self.origin[1]) / self.cell_size))

    def center_of(self, ix: int, iy: int) -> tuple[float, float]:
        return (self.origin[0] + (ix + 0.5) * self.cell_size,
                self.origin[1] + (iy + 0.5) * self.cell_size)

    def in_bounds(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.width and 0 <= iy < self.height

    def known_count(self) -> int:
        return int(np.count_nonzero(self.states != UNKNOWN))

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(self.states.copy(), self.cell_size, self.origin)


@dataclass(frozen=True)
class FrontierCell:
    ix: int
    iy: int
    x: float
    y: float


@dataclass(frozen=True)
class CoverageReport:
    explored_area: float
    explored_volume: float
    explored_pct: float


def integrate_scan(grid: OccupancyGrid, scan: LidarScan) -> OccupancyGrid:
    """Fold a scan into ``grid`` in place and return it.

    Cells a beam crosses completely become free, the cell a returning beam ends in
    becomes occupied; the partly crossed end cell of a miss stays as it was. Occupied wins within one scan, and an occupied cell is never cleared.
    """
    ox, oy = scan.origin.x - grid.origin[0], scan.origin.y - grid.origin[1]
    cix, ciy = math.floor(ox / grid.cell_size), math.floor(oy / grid.cell_size)
    if not grid.in_bounds(cix, ciy):
        raise ValueError("scan origin outside map bounds")
    ranges = np.asarray(scan.ranges, dtype=float)
    hits = np.asarray(scan.hits, dtype=bool)
    mark_rays(grid.states, float(grid.cell_size), ox, oy, scan.origin.theta + scan.bearings,
              ranges, hits, FREE, OCCUPIED)
    return grid


def frontier_mask(grid: OccupancyGrid) -> np.ndarray:
    st = grid.states
    unk = st == UNKNOWN
    adj = np.zeros_like(unk)
    adj[1:, :] |= unk[:-1, :]
    adj[:-1, :] |= unk[1:, :]
    adj[:, 1:] |= unk[:, :-1]
    adj[:, :-1] |= unk[:, 1:]
    return (st == FREE) & adj


def detect_frontiers(grid: OccupancyGrid) -> list[FrontierCell]:
    """Free cells with at least one unknown 4-neighbour, sorted by (iy, ix)."""
    iys, ixs = np.nonzero(frontier_mask(grid))
    return [FrontierCell(ix, iy, *grid.center_of(ix, iy)) for iy, ix in zip(iys.tolist(), ixs.tolist())]


def reachable_free(world: WorldGrid) -> np.ndarray:
    """4-connected free component of the world containing the start cell."""
    labels, _ = ndimage.label(~world.cells)
    sx, sy = world.start_cell()
    return labels == labels[sy, sx]


def coverage(grid: OccupancyGrid, world: WorldGrid, nominal_height: float = 3.0,
             reachable: np.ndarray | None = None) -> CoverageReport:
    if grid.states.shape != world.cells.shape or not math.isclose(grid.cell_size, world.cell_size):
        raise ValueError("map and world geometry differ")
    if reachable is None:
        reachable = reachable_free(world)
    known = np.count_nonzero((grid.states != UNKNOWN) & reachable)
    area = known * grid.cell_size ** 2
    pct = 100.0 * known / max(int(np.count_nonzero(reachable)), 1)
    return CoverageReport(area, area * nominal_height, pct)


def dump_map(grid: OccupancyGrid) -> str:
    lut = np.array([_CHARS[UNKNOWN], _CHARS[FREE], _CHARS[OCCUPIED]])
    out = [f"{grid.width} {grid.height} {grid.cell_size:g}"]
    for iy in range(grid.height - 1, -1, -1):
        out.append("".join(lut[grid.states[iy]]))
    return "\n".join(out) + "\n"


def load_map(text: str) -> OccupancyGrid:
    lines = text.splitlines()
    w, h, cs = lines[0].split()
    w, h = int(w), int(h)
    states = np.empty((h, w), dtype=np.int8)
    for r in range(h):
        row = lines[r + 1]
        if len(row) != w:
            raise ValueError(f"line {r + 2}: ragged row")
        try:
            states[h - 1 - r] = [_STATES[c] for c in row]
        except KeyError as exc:
            raise ValueError(f"line {r + 2}: unknown character {exc}") from None
    return OccupancyGrid(states, float(cs))
