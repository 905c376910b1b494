"""Episode runner: sense -> map -> plan -> track, with the metric suite and CSV output."""

from __future__ import annotations

import dataclasses
import logging
import math
import statistics
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import global_planner as gp
from .local_planner import (LocalHorizon, default_stride, order_tour, sample_viewpoints,
                            select_viewpoints, visibility_table, with_gain)
from ._kernels import warmup
from .mapping import (FREE, OCCUPIED, FrontierCell, OccupancyGrid, coverage, frontier_mask,
                      integrate_scan, reachable_free)
from .paths import nearest_in_mask, shortest_path, traversable
from .tracker import PurePursuit, TrackerConfig, closest_arc, heading_error
from .world import (CollisionError, DriftModel, Pose, VelocityCommand, WorldGrid, apply_drift, load_world,
                    simulate_scan, step_kinematics)

log = logging.getLogger(__name__)

CSV_HEADER = "t_s,explored_m3,explored_pct,distance_m,plan_runtime_s"
COMPLETE, TIMEOUT, STUCK = "complete", "timeout", "stuck"
EXIT_CODES = {COMPLETE: 0, TIMEOUT: 2, STUCK: 3}


class ConfigError(ValueError):
    pass


@dataclass
class EpisodeConfig:
    world: str = "builtin:office"
    seed: int = 0
    # sensor
    n_beams: int = 720
    max_range: float = 15.0
    scan_period: float = 0.1
    # planners
    robot_radius: float = 0.3
    horizon_half_side: float = 7.5
    max_candidates: int = 40
    viewpoint_stride: int = 0  # 0: ceil(frontiers / max_candidates)
    sampling: str = "uniform"  # or "random"
    min_gain: int = 5
    gain_range: float = 0.0  # 0: use max_range
    region_size: float = 10.0
    replan_period: float = 3.0
    dormant_after: int = 3
    # tracker
    lookahead_gain: float = 1.0
    lookahead_min: float = 0.5
    lookahead_max: float = 3.0
    v_max: float = 1.5
    omega_max: float = 1.57
    goal_tolerance: float = 0.2
    # drift
    drift_sigma_per_meter: float = 0.0
    # episode
    dt: float = 0.05
    max_sim_time: float = 1200.0
    nominal_height: float = 3.0
    stuck_time: float = 30.0
    go_home: bool = True
    go_home_time: float = 600.0
    runtime_clock: str = "wall"  # "none" writes zeros so CSVs are byte-comparable

    def __post_init__(self):
        if not self.dt > 0 or not self.max_sim_time > 0:
            raise ConfigError("dt and max_sim_time must be positive")
        if self.sampling not in ("uniform", "random"):
            raise ConfigError(f"sampling must be 'uniform' or 'random', not {self.sampling!r}")
        if self.runtime_clock not in ("wall", "none"):
            raise ConfigError("runtime_clock must be 'wall' or 'none'")
        if self.drift_sigma_per_meter < 0:
            raise ConfigError("drift_sigma_per_meter must be >= 0")
        try:
            self.tracker_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def tracker_config(self) -> TrackerConfig:
        return TrackerConfig(self.lookahead_gain, self.lookahead_min, self.lookahead_max,
                             self.v_max, self.omega_max, self.goal_tolerance)

    def with_overrides(self, **kw) -> "EpisodeConfig":
        return dataclasses.replace(self, **kw)


def _coerce(name: str, typ, raw: str):
    if typ in (bool, "bool"):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    conv = {"int": int, "float": float, "str": str}.get(typ, typ)
    try:
        return conv(raw)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {typ}") from None


def parse_config(text: str, base_dir: Path | None = None) -> EpisodeConfig:
    fields = {f.name: f.type for f in dataclasses.fields(EpisodeConfig)}
    values = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in fields:
            raise ConfigError(f"line {n}: unknown key {key!r}")
        values[key] = _coerce(key, fields[key], raw)
    if "world" in values and base_dir is not None and not values["world"].startswith("builtin:"):
        values["world"] = str((base_dir / values["world"]).resolve()) if not Path(values["world"]).is_absolute() else values["world"]
    return EpisodeConfig(**values)


def load_config(path) -> EpisodeConfig:
    path = Path(path)
    return parse_config(path.read_text(), path.parent)


def dump_config(cfg: EpisodeConfig) -> str:
    out = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        out.append(f"{f.name} = {str(v).lower() if isinstance(v, bool) else v}")
    return "\n".join(out) + "\n"


def world_text(spec: str) -> str:
    if spec.startswith("builtin:"):
        name = spec.split(":", 1)[1]
        return resources.files("hexplore").joinpath("worlds", f"{name}.world").read_text()
    return Path(spec).read_text()


@dataclass
class EpisodeMetrics:
    rows: list[tuple[float, float, float, float, float]] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        i = CSV_HEADER.split(",").index(name)
        return np.array([r[i] for r in self.rows], dtype=float)


@dataclass
class EpisodeOutcome:
    status: str
    final_map: OccupancyGrid
    metrics: EpisodeMetrics
    regions: list = field(default_factory=list)
    localization_error: float | None = None
    trace: list = field(default_factory=list)  # true (x, y) per tick
    max_abs_v: float = 0.0
    max_abs_omega: float = 0.0
    blocked_steps: int = 0  # ticks where every fallback command would have collided
    live_frontiers_at_end: int = 0
    diagnostics: str = ""

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.status]


def localization_error(estimated_end: Pose, true_start: Pose) -> float:
    """Euclidean distance between the odometry estimate and the true pose it should match."""
    return math.hypot(estimated_end.x - true_start.x, estimated_end.y - true_start.y)


@dataclass
class PlanResult:
    kind: str  # local | global | continue | none | complete
    path: list
    viewpoints: list = field(default_factory=list)
    regions: list = field(default_factory=list)


class ExplorationPlanner:
    """One planning iteration: local viewpoint tour first, global region route as fallback."""

    def __init__(self, cfg: EpisodeConfig):
        self.cfg = cfg
        self.globals = gp.GlobalPlanner(cfg.region_size, cfg.robot_radius, cfg.dormant_after)
        self.rng = np.random.default_rng([cfg.seed, 1]) if cfg.sampling == "random" else None
        self.route: gp.GlobalRoute | None = None
        self.gain_range = cfg.gain_range or cfg.max_range

    def plan(self, grid: OccupancyGrid, pose: Pose, route_active: bool = False) -> PlanResult:
        cfg = self.cfg
        trav = traversable(grid, cfg.robot_radius)
        cell = grid.cell_of(pose.x, pose.y)
        start = cell if trav[cell[1], cell[0]] else nearest_in_mask(trav, cell, 5)
        if start is None:
            return PlanResult("none", [])
        reach_free = gp.reachable_known_free(grid, start)
        # the global layer is refreshed every iteration, used only when the local layer is empty
        regions, dist = self.globals.update(grid, start, trav, reach_free)
        reach = np.isfinite(dist)

        fm = frontier_mask(grid)
        horizon = LocalHorizon(pose, cfg.horizon_half_side)
        frontiers = self._frontiers_in(grid, fm, horizon)
        stride = cfg.viewpoint_stride or default_stride(len(frontiers), cfg.max_candidates)
        cands = sample_viewpoints(grid, frontiers, horizon, stride, cfg.robot_radius, rng=self.rng, clear=reach)
        cands = [with_gain(grid, c, self.gain_range, fm) for c in cands]
        chosen = select_viewpoints(cands, cfg.min_gain)
        if chosen:
            self.route = None
            tour = order_tour(start, chosen, grid, trav=trav)
            if tour.viewpoints:
                return PlanResult("local", tour.path, tour.viewpoints, regions)

        if route_active and self.route is not None:
            return PlanResult("continue", self.route.path, regions=regions)
        route, regions = self.globals.route(grid, start, trav, regions, dist)
        self.route = route
        if route is not None and len(route.path) > 1:
            return PlanResult("global", route.path, regions=regions)
        live = gp.live_frontiers(grid, regions, cfg.region_size, reach_free)
        if gp.is_exploration_complete(regions, live, grid):
            return PlanResult("complete", [], regions=regions)
        path = self._to_frontier(grid, start, trav, live, dist)
        if path is not None:
            return PlanResult("global", path, regions=regions)
        return PlanResult("none", route.path if route else [], regions=regions)

    @staticmethod
    def _to_frontier(grid, start, trav, live, dist):
        """Path to the traversable cell nearest (by path) to a live frontier, within 5 cells of it."""
        if not live.any():
            return None
        near = ndimage.binary_dilation(live, structure=np.ones((3, 3), bool), iterations=5)
        d = np.where(near & np.isfinite(dist), dist, np.inf)
        k = int(np.argmin(d))
        if not np.isfinite(d.flat[k]) or d.flat[k] == 0:
            return None
        goal = (k % grid.width, k // grid.width)
        path = shortest_path(grid, start, goal, trav=trav)
        return path if path is not None and len(path) > 1 else None

    @staticmethod
    def _frontiers_in(grid: OccupancyGrid, fm: np.ndarray, horizon: LocalHorizon) -> list[FrontierCell]:
        c = horizon.center
        hs = horizon.half_side
        x0, y0 = grid.cell_of(c.x - hs, c.y - hs)
        x1, y1 = grid.cell_of(c.x + hs, c.y + hs)
        x0, y0 = max(x0, 0), max(y0, 0)
        iys, ixs = np.nonzero(fm[y0:y1 + 1, x0:x1 + 1])
        out = []
        for iy, ix in zip((iys + y0).tolist(), (ixs + x0).tolist()):
            x, y = grid.center_of(ix, iy)
            if horizon.contains(x, y):
                out.append(FrontierCell(ix, iy, x, y))
        return out


def _cells_to_points(grid: OccupancyGrid, path) -> list[tuple[float, float]]:
    return [grid.center_of(ix, iy) for ix, iy in path]


def run_episode(cfg: EpisodeConfig, world: WorldGrid | None = None, record_trace: bool = False) -> EpisodeOutcome:
    if world is None:
        world = load_world(world_text(cfg.world))
    grid = OccupancyGrid.like(world)
    reachable = reachable_free(world)
    planner = ExplorationPlanner(cfg)
    tcfg = cfg.tracker_config()
    drift = DriftModel(cfg.drift_sigma_per_meter, cfg.seed)
    clock = time.perf_counter if cfg.runtime_clock == "wall" else None
    if clock is not None:
        # keep JIT compilation and table building out of the timed planning calls
        warmup()
        visibility_table(planner.gain_range / world.cell_size)

    pose = world.start
    est = world.start
    dt = cfg.dt
    scan_every = max(1, round(cfg.scan_period / dt))
    replan_every = max(1, round(cfg.replan_period / dt))
    stuck_ticks = max(1, round(cfg.stuck_time / dt))
    max_ticks = max(1, math.ceil(cfg.max_sim_time / dt - 1e-9))

    metrics = EpisodeMetrics()
    out = EpisodeOutcome(TIMEOUT, grid, metrics)
    distance = 0.0
    controller: PurePursuit | None = None
    path_cells: np.ndarray | None = None
    kind = "none"
    next_plan = 0
    anchor_pose, anchor_known, anchor_tick = pose, -1, 0
    best_rem, best_tick = math.inf, 0

    def sense():
        integrate_scan(grid, simulate_scan(world, pose, cfg.n_beams, cfg.max_range))

    sense()
    tick = 0
    blocked = 0
    status = None
    try:
        while tick < max_ticks:
            if tick % scan_every == 0 and tick > 0:
                sense()
                if path_cells is not None and (grid.states[path_cells[:, 1], path_cells[:, 0]] == OCCUPIED).any():
                    next_plan = tick
            if controller is not None and controller.done(pose):
                controller = None
                next_plan = min(next_plan, tick)
            if controller is not None and tick % scan_every == 0:
                # progress watchdog: pure pursuit can orbit a goal it cannot turn tightly enough to hit
                s_arc, _ = closest_arc(controller.path, pose.x, pose.y, controller.cfg.search_window)
                rem = controller.path.length - s_arc
                if rem < best_rem - 0.05:
                    best_rem, best_tick = rem, tick
                elif tick - best_tick >= replan_every:
                    controller, path_cells, kind = None, None, "none"
                    next_plan = min(next_plan, tick)
            if tick >= next_plan:
                t0 = clock() if clock else 0.0
                res = planner.plan(grid, pose, route_active=(kind == "global" and controller is not None))
                runtime = (clock() - t0) if clock else 0.0
                cov = coverage(grid, world, cfg.nominal_height, reachable)
                metrics.rows.append((tick * dt, cov.explored_volume, cov.explored_pct, distance, runtime))
                if res.regions:
                    out.regions = res.regions
                if res.kind == "complete":
                    status = COMPLETE
                    break
                if res.kind == "continue":
                    next_plan = tick + replan_every
                elif res.kind in ("local", "global") and len(res.path) > 1:
                    kind = res.kind
                    controller = PurePursuit(tcfg, _cells_to_points(grid, res.path))
                    path_cells = np.array(res.path)
                    best_rem, best_tick = math.inf, tick
                    next_plan = tick + replan_every
                else:
                    kind = res.kind
                    controller, path_cells = None, None
                    next_plan = tick + scan_every

            cmd, new_pose = _safe_step(controller, pose, world, cfg)
            out.max_abs_v = max(out.max_abs_v, abs(cmd.v))
            out.max_abs_omega = max(out.max_abs_omega, abs(cmd.omega))
            if new_pose is None:
                out.blocked_steps += 1
                new_pose = pose
                blocked += 1
                if blocked >= round(1.0 / dt):
                    controller, path_cells, blocked = None, None, 0
                    next_plan = tick + 1
            else:
                blocked = 0
            step = math.hypot(new_pose.x - pose.x, new_pose.y - pose.y)
            distance += step
            pose = new_pose
            est = apply_drift(pose, step, drift)
            if record_trace:
                out.trace.append((pose.x, pose.y))
            tick += 1

            known = grid.known_count()
            if known != anchor_known or pose.distance_to(anchor_pose) > 0.05:
                anchor_pose, anchor_known, anchor_tick = pose, known, tick
            elif tick - anchor_tick >= stuck_ticks:
                status = STUCK
                break
    except (CollisionError, ValueError) as exc:
        # simulation or planning failure: classify the episode rather than crash
        log.warning("episode aborted at t=%.2f s: %s", tick * dt, exc)
        out.diagnostics = str(exc)
        status = STUCK

    end_tick = tick
    out.status = status or TIMEOUT
    regions = out.regions or gp.classify_regions(grid, cfg.region_size)
    out.regions = regions
    trav = traversable(grid, cfg.robot_radius)
    cell = grid.cell_of(pose.x, pose.y)
    if trav[cell[1], cell[0]]:
        live = gp.live_frontiers(grid, regions, cfg.region_size, gp.reachable_known_free(grid, cell))
        out.live_frontiers_at_end = int(live.sum())

    if out.status == COMPLETE and cfg.go_home:
        res = _go_home(cfg, world, grid, pose, drift, est)
        if res is not None:
            pose, est, vmax, wmax = res
            out.max_abs_v = max(out.max_abs_v, vmax)
            out.max_abs_omega = max(out.max_abs_omega, wmax)
            # error of the odometry estimate at the moment the robot is back home
            out.localization_error = localization_error(est, pose)

    rows = metrics.rows
    rts = [r[4] for r in rows]
    metrics.summary = {
        "status": out.status,
        "exploration_time_s": end_tick * dt if out.status != COMPLETE else rows[-1][0],
        "plan_runtime_mean_s": statistics.fmean(rts) if rts else 0.0,
        "plan_runtime_sd_s": statistics.stdev(rts) if len(rts) > 1 else 0.0,
        "explored_m3": rows[-1][1] if rows else 0.0,
        "explored_pct": rows[-1][2] if rows else 0.0,
        "distance_m": rows[-1][3] if rows else 0.0,
        "localization_error_m": out.localization_error,
        "iterations": len(rows),
    }
    return out


def _safe_step(controller, pose, world, cfg):
    """Advance one tick without entering an occupied cell.

    A blocked step is retried at the minimum look-ahead, then as a turn in place
    toward the path. Returns ``(command, pose)``; pose is None if even that fails.
    """
    if controller is None:
        return VelocityCommand(), pose
    cmd = controller.command(pose)
    new_pose = step_kinematics(pose, cmd, cfg.dt, cfg.v_max, cfg.omega_max)
    if not world.is_occupied_at(new_pose.x, new_pose.y):
        return cmd, new_pose
    cmd = controller.command(pose, tight=True)
    new_pose = step_kinematics(pose, cmd, cfg.dt, cfg.v_max, cfg.omega_max)
    if not world.is_occupied_at(new_pose.x, new_pose.y):
        return cmd, new_pose
    # head back to the closest point on the path, turning first
    controller.current_v = 0.0
    s, _ = closest_arc(controller.path, pose.x, pose.y, controller.cfg.search_window)
    target = controller.path.point_at(s)
    gap = math.hypot(target[0] - pose.x, target[1] - pose.y)
    if gap < 0.05:
        target = controller.path.point_at(s + controller.cfg.lookahead_min)
        gap = math.hypot(target[0] - pose.x, target[1] - pose.y)
    err = heading_error(pose, target)
    w = max(-cfg.omega_max, min(cfg.omega_max, err / cfg.dt))
    v = min(cfg.v_max, gap / cfg.dt) if abs(err) < 0.1 else 0.0
    cmd = VelocityCommand(v, w)
    new_pose = step_kinematics(pose, cmd, cfg.dt, cfg.v_max, cfg.omega_max)
    if not world.is_occupied_at(new_pose.x, new_pose.y):
        return cmd, new_pose
    return VelocityCommand(), None


def _go_home(cfg, world, grid, pose, drift, est):
    """Track a route back to the start cell; None if it cannot be reached."""
    trav = traversable(grid, cfg.robot_radius)
    cell = grid.cell_of(pose.x, pose.y)
    start = cell if trav[cell[1], cell[0]] else nearest_in_mask(trav, cell, 5)
    home = world.start_cell()
    if start is None or not trav[home[1], home[0]]:
        return None
    path = shortest_path(grid, start, home, trav=trav)
    if path is None:
        return None
    pts = _cells_to_points(grid, path)
    pts.append((world.start.x, world.start.y))
    ctl = PurePursuit(cfg.tracker_config(), pts)
    vmax = wmax = 0.0
    for _ in range(max(1, round(cfg.go_home_time / cfg.dt))):
        if ctl.done(pose):
            return pose, est, vmax, wmax
        cmd, new_pose = _safe_step(ctl, pose, world, cfg)
        vmax, wmax = max(vmax, abs(cmd.v)), max(wmax, abs(cmd.omega))
        if new_pose is None:
            return None
        step = math.hypot(new_pose.x - pose.x, new_pose.y - pose.y)
        pose = new_pose
        est = apply_drift(pose, step, drift)
    return None


# ---------------------------------------------------------------- CSV

def _fmt(v) -> str:
    if v is None:
        return "absent"
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def metrics_csv(metrics: EpisodeMetrics) -> str:
    lines = [CSV_HEADER]
    lines += [",".join(f"{v:.6f}" for v in row) for row in metrics.rows]
    lines.append("# summary:")
    lines += [f"# {k} = {_fmt(v)}" for k, v in metrics.summary.items()]
    return "\n".join(lines) + "\n"


def read_metrics_csv(text: str) -> EpisodeMetrics:
    lines = text.splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError("not a metrics CSV (header mismatch)")
    m = EpisodeMetrics()
    for line in lines[1:]:
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                k, v = (s.strip() for s in body.split("=", 1))
                if v == "absent":
                    m.summary[k] = None
                else:
                    try:
                        m.summary[k] = int(v) if k == "iterations" else float(v)
                    except ValueError:
                        m.summary[k] = v
            continue
        if line.strip():
            m.rows.append(tuple(float(x) for x in line.split(",")))
    return m


SUMMARY_COLUMNS = ("exploration_time_s", "plan_runtime_mean_s", "explored_m3", "explored_pct",
                   "distance_m", "localization_error_m")


def summarize(runs: list[EpisodeMetrics]) -> dict:
    """Per-column (mean, sample sd, n). Absent localization errors are skipped."""
    if not runs:
        raise ValueError("no runs to summarize")
    out = {}
    for col in SUMMARY_COLUMNS:
        vals = [r.summary.get(col) for r in runs]
        vals = [float(v) for v in vals if v is not None]
        if not vals:
            out[col] = (None, None, 0)
            continue
        sd = statistics.stdev(vals) if len(vals) > 1 else 0.0
        out[col] = (statistics.fmean(vals), sd, len(vals))
    return out


def format_summary(table: dict) -> str:
    lines = ["metric,mean,sd,n"]
    for col, (mean, sd, n) in table.items():
        lines.append(f"{col},{_fmt(mean)},{_fmt(sd)},{n}")
    m3, pct = table["explored_m3"], table["explored_pct"]
    if m3[0] is not None:
        lines.append(f"# explored volume: {m3[0]:.2f}±{m3[1]:.2f}({pct[0]:.2f}%)")
    return "\n".join(lines) + "\n"
