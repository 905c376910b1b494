"""Pure Pursuit with a speed-proportional look-ahead."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .world import OMEGA_MAX, V_MAX, Pose, VelocityCommand, normalize_angle


@dataclass(frozen=True)
class TrackerConfig:
    lookahead_gain: float = 1.0  # s
    lookahead_min: float = 0.5
    lookahead_max: float = 3.0
    v_max: float = V_MAX
    omega_max: float = OMEGA_MAX
    goal_tolerance: float = 0.2
    search_window: float = 3.0  # m of arc searched past the progress point

    def __post_init__(self):
        if not 0 < self.lookahead_min <= self.lookahead_max:
            raise ValueError("need 0 < lookahead_min <= lookahead_max")
        if self.v_max <= 0 or self.omega_max <= 0 or self.goal_tolerance <= 0:
            raise ValueError("v_max, omega_max and goal_tolerance must be positive")


class TrackedPath:
    def __init__(self, waypoints):
        pts = np.asarray(waypoints, dtype=float).reshape(-1, 2)
        if len(pts) == 0:
            raise ValueError("empty path")
        self.points = pts
        seg = np.hypot(*np.diff(pts, axis=0).T) if len(pts) > 1 else np.zeros(0)
        self.arc = np.concatenate([[0.0], np.cumsum(seg)])
        self.progress = 0
        self.reach = 0.0  # furthest arc position matched so far

    @property
    def length(self) -> float:
        return float(self.arc[-1])

    @property
    def goal(self) -> tuple[float, float]:
        return float(self.points[-1, 0]), float(self.points[-1, 1])

    def point_at(self, s: float) -> tuple[float, float]:
        if s >= self.arc[-1]:
            return self.goal
        i = int(np.searchsorted(self.arc, s, side="right")) - 1
        i = min(max(i, 0), len(self.points) - 2)
        span = self.arc[i + 1] - self.arc[i]
        u = 0.0 if span <= 0 else (s - self.arc[i]) / span
        p = self.points[i] + u * (self.points[i + 1] - self.points[i])
        return float(p[0]), float(p[1])


def compute_lookahead(cfg: TrackerConfig, current_v: float) -> float:
    if current_v < 0:
        raise ValueError("current_v must be >= 0")
    return min(max(cfg.lookahead_gain * current_v, cfg.lookahead_min), cfg.lookahead_max)


def closest_arc(path: TrackedPath, x: float, y: float, window: float = math.inf):
    """Arc position and segment index of the closest path point at or after ``path.progress``."""
    pts = path.points
    if len(pts) == 1:
        return 0.0, 0
    lo = path.progress
    # segments starting within ``window`` of the furthest point matched so far
    hi = int(np.searchsorted(path.arc, max(path.arc[lo], path.reach) + window, side="right"))
    hi = min(max(hi, lo + 1), len(pts) - 1)
    a = pts[lo:hi]
    d = pts[lo + 1:hi + 1] - a
    l2 = (d ** 2).sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        u = np.where(l2 > 0, ((x - a[:, 0]) * d[:, 0] + (y - a[:, 1]) * d[:, 1]) / l2, 0.0)
    u = np.clip(u, 0.0, 1.0)
    px = a[:, 0] + u * d[:, 0]
    py = a[:, 1] + u * d[:, 1]
    k = int(np.argmin((px - x) ** 2 + (py - y) ** 2))
    seg = lo + k
    return float(path.arc[seg] + u[k] * math.sqrt(l2[k])), seg


def lookahead_point(path: TrackedPath, pose: Pose, lookahead: float, window: float = math.inf):
    """Point ``lookahead`` metres of arc beyond the closest point; advances ``path.progress``."""
    if lookahead <= 0:
        raise ValueError("lookahead must be positive")
    s, seg = closest_arc(path, pose.x, pose.y, window)
    path.progress = max(path.progress, seg)
    path.reach = max(path.reach, s)
    return path.point_at(s + lookahead), path.progress


def pursuit_command(pose: Pose, target, cfg: TrackerConfig, current_v: float = 0.0,
                    remaining: float | None = None) -> VelocityCommand:
    """Curvature 2*y_l/L^2 toward ``target``; rotate in place when it lies behind.

    ``remaining`` is the distance to the end of the path, used for the speed taper.
    """
    dxw, dyw = target[0] - pose.x, target[1] - pose.y
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    xl = c * dxw + s * dyw
    yl = -s * dxw + c * dyw
    l2 = xl * xl + yl * yl
    if l2 < 1e-12:
        return VelocityCommand(0.0, 0.0)
    alpha = math.atan2(yl, xl)
    if abs(alpha) > math.pi / 2:
        return VelocityCommand(0.0, math.copysign(cfg.omega_max, alpha))
    v = cfg.v_max
    if remaining is not None and remaining < 2 * cfg.goal_tolerance:
        v = cfg.v_max * max(remaining, 0.0) / (2 * cfg.goal_tolerance)
    kappa = 2.0 * yl / l2
    w = min(max(kappa * v, -cfg.omega_max), cfg.omega_max)
    return VelocityCommand(v, w)


class PurePursuit:
    """Stateful controller over one path; speed feedback is the last commanded v."""

    def __init__(self, cfg: TrackerConfig, waypoints):
        self.cfg = cfg
        self.path = TrackedPath(waypoints)
        self.current_v = 0.0

    def done(self, pose: Pose) -> bool:
        gx, gy = self.path.goal
        return math.hypot(gx - pose.x, gy - pose.y) <= self.cfg.goal_tolerance

    def command(self, pose: Pose, tight: bool = False) -> VelocityCommand:
        """Next command. ``tight`` pursues at the minimum look-ahead (used to back off a corner)."""
        gx, gy = self.path.goal
        remaining = math.hypot(gx - pose.x, gy - pose.y)
        if remaining <= self.cfg.goal_tolerance:
            self.current_v = 0.0
            return VelocityCommand(0.0, 0.0)
        ld = self.cfg.lookahead_min if tight else compute_lookahead(self.cfg, self.current_v)
        target, _ = lookahead_point(self.path, pose, ld, self.cfg.search_window)
        if math.hypot(target[0] - pose.x, target[1] - pose.y) < 1e-6:
            target = (gx, gy)
        cmd = pursuit_command(pose, target, self.cfg, self.current_v, remaining)
        self.current_v = abs(cmd.v)
        return cmd


def heading_error(pose: Pose, target) -> float:
    return normalize_angle(math.atan2(target[1] - pose.y, target[0] - pose.x) - pose.theta)
