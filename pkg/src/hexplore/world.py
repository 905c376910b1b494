"""Ground-truth world, unicycle kinematics, raycast LiDAR and odometry drift."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import cast_rays

log = logging.getLogger(__name__)

V_MAX = 1.5
OMEGA_MAX = 1.57


class WorldFormatError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class CollisionError(ValueError):
    pass


def normalize_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    r = math.remainder(a, 2.0 * math.pi)
    if r <= -math.pi:
        r += 2.0 * math.pi
    return r


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", normalize_angle(float(self.theta)))

    def distance_to(self, other: "Pose") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class VelocityCommand:
    v: float = 0.0
    omega: float = 0.0

    def clamped(self, v_max: float = V_MAX, omega_max: float = OMEGA_MAX):
        """Return ``(command, was_clamped)`` with both components saturated."""
        v = min(max(self.v, -v_max), v_max)
        w = min(max(self.omega, -omega_max), omega_max)
        return VelocityCommand(v, w), (v != self.v or w != self.omega)


@dataclass
class WorldGrid:
    """Binary ground truth. ``cells[iy, ix]`` is True where occupied; iy grows with +y."""

    cells: np.ndarray
    cell_size: float
    start: Pose

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        return math.floor(x / self.cell_size), math.floor(y / self.cell_size)

    def center_of(self, ix: int, iy: int) -> tuple[float, float]:
        return (ix + 0.5) * self.cell_size, (iy + 0.5) * self.cell_size

    def in_bounds(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.width and 0 <= iy < self.height

    def is_occupied_at(self, x: float, y: float) -> bool:
        ix, iy = self.cell_of(x, y)
        return not self.in_bounds(ix, iy) or bool(self.cells[iy, ix])

    def start_cell(self) -> tuple[int, int]:
        return self.cell_of(self.start.x, self.start.y)


def load_world(text: str) -> WorldGrid:
    lines = text.splitlines()
    if not lines:
        raise WorldFormatError(1, "empty world file")
    header = lines[0].split()
    if len(header) != 3:
        raise WorldFormatError(1, "header must be 'width height cell_size'")
    try:
        width, height = int(header[0]), int(header[1])
        cell_size = float(header[2])
    except ValueError as exc:
        raise WorldFormatError(1, f"malformed header: {exc}") from None
    if width < 1 or height < 1 or not cell_size > 0:
        raise WorldFormatError(1, "width, height and cell_size must be positive")

    rows = lines[1:]
    # tolerate trailing blank lines only
    while len(rows) > height and not rows[-1].strip():
        rows.pop()
    if len(rows) != height:
        raise WorldFormatError(len(lines) + 1, f"expected {height} rows, found {len(rows)}")

    cells = np.zeros((height, width), dtype=bool)
    start = None
    for r, row in enumerate(rows):
        lineno = r + 2
        if len(row) != width:
            raise WorldFormatError(lineno, f"ragged row: length {len(row)}, expected {width}")
        iy = height - 1 - r
        for ix, ch in enumerate(row):
            if ch == "#":
                cells[iy, ix] = True
            elif ch == "S":
                if start is not None:
                    raise WorldFormatError(lineno, "duplicate start marker 'S'")
                start = (ix, iy)
            elif ch != ".":
                raise WorldFormatError(lineno, f"unknown character {ch!r} at column {ix}")
    if start is None:
        raise WorldFormatError(len(lines), "missing start marker 'S'")
    ix, iy = start
    return WorldGrid(cells, cell_size, Pose((ix + 0.5) * cell_size, (iy + 0.5) * cell_size, 0.0))


def dump_world(world: WorldGrid) -> str:
    sx, sy = world.start_cell()
    out = [f"{world.width} {world.height} {world.cell_size:g}"]
    for iy in range(world.height - 1, -1, -1):
        row = ["#" if c else "." for c in world.cells[iy]]
        if iy == sy:
            row[sx] = "S"
        out.append("".join(row))
    return "\n".join(out) + "\n"


def step_kinematics(pose: Pose, cmd: VelocityCommand, dt: float,
                    v_max: float = V_MAX, omega_max: float = OMEGA_MAX) -> Pose:
    """Exact-arc unicycle update. Out-of-limit commands are saturated (logged)."""
    cmd, clamped = cmd.clamped(v_max, omega_max)
    if clamped:
        log.warning("velocity command saturated to v=%.3f omega=%.3f", cmd.v, cmd.omega)
    v, w = cmd.v, cmd.omega
    th = pose.theta
    if abs(w) < 1e-9:
        return Pose(pose.x + v * dt * math.cos(th), pose.y + v * dt * math.sin(th), th)
    # half-angle form of the arc: no cancellation when omega is small
    half = 0.5 * w * dt
    chord = 2.0 * v * math.sin(half) / w
    mid = th + half
    return Pose(pose.x + chord * math.cos(mid), pose.y + chord * math.sin(mid), th + w * dt)


def trace_rays(x0: float, y0: float, angles, lengths, cell_size: float, eps: float = 1e-9):
    """Exact grid traversal of many rays from a common origin.

    Returns ``(ix, iy, t_in, t_out, valid)``, each shaped (n_rays, n_segments) and
    ordered along the ray. A segment is one maximal interval spent inside a cell;
    zero-length pieces (rays grazing a grid corner) are marked invalid.
    """
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    lengths = np.broadcast_to(np.asarray(lengths, dtype=float), angles.shape)
    c = np.cos(angles)[:, None]
    s = np.sin(angles)[:, None]
    n = int(math.ceil(float(lengths.max()) / cell_size)) + 2
    k = np.arange(n)[None, :]
    ix0 = math.floor(x0 / cell_size)
    iy0 = math.floor(y0 / cell_size)
    with np.errstate(divide="ignore", invalid="ignore"):
        tx = (np.where(c > 0, ix0 + 1 + k, ix0 - k) * cell_size - x0) / c
        ty = (np.where(s > 0, iy0 + 1 + k, iy0 - k) * cell_size - y0) / s
    tx = np.where(np.abs(c) < 1e-12, np.inf, tx)
    ty = np.where(np.abs(s) < 1e-12, np.inf, ty)
    t = np.concatenate([np.zeros((len(angles), 1)), tx, ty], axis=1)
    t = np.minimum(np.maximum(t, 0.0), lengths[:, None])
    t.sort(axis=1)
    t_in, t_out = t[:, :-1], t[:, 1:]
    valid = (t_out - t_in) > eps
    mid = 0.5 * (t_in + t_out)
    ix = np.floor((x0 + mid * c) / cell_size).astype(np.int64)
    iy = np.floor((y0 + mid * s) / cell_size).astype(np.int64)
    return ix, iy, t_in, t_out, valid


@dataclass(frozen=True)
class LidarScan:
    origin: Pose
    bearings: np.ndarray
    ranges: np.ndarray
    hits: np.ndarray
    max_range: float


def beam_bearings(n_beams: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(n_beams) / n_beams


def simulate_scan(world: WorldGrid, pose: Pose, n_beams: int = 720, max_range: float = 15.0) -> LidarScan:
    if n_beams < 4:
        raise ValueError("n_beams must be >= 4")
    if world.is_occupied_at(pose.x, pose.y):
        raise CollisionError(f"robot in collision at ({pose.x:.3f}, {pose.y:.3f})")
    bearings = beam_bearings(n_beams)
    ranges, hits = cast_rays(world.cells, float(world.cell_size), pose.x, pose.y,
                             pose.theta + bearings, float(max_range))
    return LidarScan(pose, bearings, ranges, hits, float(max_range))


@dataclass
class DriftModel:
    """Seeded Gaussian random walk in position, scaled by distance travelled.

    The model carries its own walk state; build a fresh one per episode.
    """

    sigma_per_meter: float = 0.0
    seed: int = 0
    offset: np.ndarray = field(default_factory=lambda: np.zeros(2), repr=False)

    def __post_init__(self):
        if self.sigma_per_meter < 0:
            raise ValueError("sigma_per_meter must be >= 0")
        self._rng = np.random.default_rng(self.seed)


def apply_drift(truth: Pose, distance_delta: float, model: DriftModel) -> Pose:
    if distance_delta < 0:
        raise ValueError("distance_delta must be >= 0")
    if model.sigma_per_meter > 0 and distance_delta > 0:
        model.offset = model.offset + model._rng.normal(0.0, model.sigma_per_meter * distance_delta, size=2)
    return Pose(truth.x + model.offset[0], truth.y + model.offset[1], truth.theta)
