import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hexplore.harness import world_text
from hexplore.world import (CollisionError, DriftModel, Pose, VelocityCommand, WorldFormatError, WorldGrid,
                            apply_drift, dump_world, load_world, simulate_scan, step_kinematics)


def test_load_small_world():
    w = load_world("3 3 1.0\n...\n.S.\n...\n")
    assert (w.width, w.height) == (3, 3)
    assert w.start_cell() == (1, 1)
    assert not w.cells.any()


@pytest.mark.parametrize("text,line", [
    ("5 2 1.0\n.....\n..S.\n", 3),
    ("3 1 1.0\n.x.\n", 2),
    ("3 1 1.0\n...\n", 2),
    ("3 1 1.0\nSS.\n", 2),
    ("3 1\n.S.\n", 1),
    ("3 a 1.0\n.S.\n", 1),
    ("3 2 1.0\n.S.\n", 3),
    ("", 1),
])
def test_load_errors_carry_line(text, line):
    with pytest.raises(WorldFormatError) as e:
        load_world(text)
    assert e.value.line == line
    assert f"line {line}" in str(e.value)


def test_row_order_is_top_down():
    w = load_world("2 2 0.5\n#.\n.S\n")
    assert w.cells[1, 0] and not w.cells[0, 0]
    assert w.start == Pose(0.75, 0.25, 0.0)


def test_dump_roundtrip():
    text = "4 3 0.25\n####\n#S.#\n####\n"
    assert dump_world(load_world(text)) == text


def test_office_dimensions():
    w = load_world(world_text("builtin:office"))
    assert (w.width, w.height, w.cell_size) == (200, 80, 0.25)
    assert w.cells[0].all() and w.cells[-1].all() and w.cells[:, 0].all() and w.cells[:, -1].all()
    assert not w.is_occupied_at(w.start.x, w.start.y)


def test_kinematics_examples():
    p = step_kinematics(Pose(0, 0, 0), VelocityCommand(1, 0), 1.0)
    assert (p.x, p.y, p.theta) == pytest.approx((1, 0, 0), abs=1e-12)
    p = step_kinematics(Pose(0, 0, 0), VelocityCommand(0, 1.57), 1.0)
    assert (p.x, p.y, p.theta) == pytest.approx((0, 0, 1.57), abs=1e-12)
    p = step_kinematics(Pose(0, 0, 0), VelocityCommand(1, 1), math.pi)
    assert p.x == pytest.approx(0, abs=1e-12)
    assert p.y == pytest.approx(2, abs=1e-12)
    assert p.theta == pytest.approx(math.pi, abs=1e-12)


def test_arc_matches_fine_integration():
    n = 10_000
    dt = math.pi / n
    x = y = th = 0.0
    for _ in range(n):
        # midpoint heading per substep
        thm = th + 0.5 * dt
        x += dt * math.cos(thm)
        y += dt * math.sin(thm)
        th += dt
    p = step_kinematics(Pose(0, 0, 0), VelocityCommand(1, 1), math.pi)
    assert math.hypot(p.x - x, p.y - y) <= 1e-6


def test_saturation_is_flagged(caplog):
    with caplog.at_level("WARNING"):
        p = step_kinematics(Pose(0, 0, 0), VelocityCommand(3.0, 0), 1.0)
    assert p.x == pytest.approx(1.5)
    assert "saturated" in caplog.text


poses = st.builds(Pose, st.floats(-50, 50), st.floats(-50, 50), st.floats(-20, 20))
cmds = st.builds(VelocityCommand, st.floats(-1.5, 1.5), st.floats(-1.57, 1.57))


@settings(max_examples=200, deadline=None)
@given(poses, cmds, st.floats(1e-3, 10))
def test_theta_stays_normalized(pose, cmd, dt):
    p = step_kinematics(pose, cmd, dt)
    assert -math.pi < p.theta <= math.pi


@settings(max_examples=200, deadline=None)
@given(poses, cmds, st.floats(1e-3, 0.5), st.integers(1, 30))
def test_step_size_independent(pose, cmd, dt, n):
    one = step_kinematics(pose, cmd, n * dt)
    many = pose
    for _ in range(n):
        many = step_kinematics(many, cmd, dt)
    assert math.hypot(one.x - many.x, one.y - many.y) <= 1e-9
    assert abs(math.remainder(one.theta - many.theta, 2 * math.pi)) <= 1e-9


def _open_world(w, h, cs, start):
    cells = np.zeros((h, w), dtype=bool)
    return WorldGrid(cells, cs, start)


def test_scan_nothing_to_hit():
    world = _open_world(40, 40, 0.25, Pose(5.0, 5.0))
    scan = simulate_scan(world, world.start, 360, 3.0)
    assert not scan.hits.any()
    assert np.all(scan.ranges == 3.0)
    assert np.all(np.diff(scan.bearings) > 0) and scan.bearings[0] == 0 and scan.bearings[-1] < 2 * np.pi


def test_scan_wall_ahead():
    world = _open_world(40, 40, 0.25, Pose(5.0, 5.0))
    world.cells[:, 28] = True  # face at x = 7.0
    scan = simulate_scan(world, world.start, 8, 10.0)
    assert scan.hits[0]
    assert abs(scan.ranges[0] - 2.0) <= 0.25


def test_scan_in_collision():
    world = _open_world(4, 4, 1.0, Pose(0.5, 0.5))
    world.cells[2, 2] = True
    with pytest.raises(CollisionError):
        simulate_scan(world, Pose(2.5, 2.5), 8, 3.0)
    with pytest.raises(ValueError):
        simulate_scan(world, Pose(0.5, 0.5), 3, 3.0)


def _marching_range(world, x, y, ang, max_range):
    step = world.cell_size / 100
    c, s = math.cos(ang), math.sin(ang)
    n = int(max_range / step)
    for k in range(n + 1):
        t = k * step
        if world.is_occupied_at(x + t * c, y + t * s):
            return t, True
    return max_range, False


def _corner_clip(world, x, y, ang, r):
    """True when the ray enters an occupied cell at ``r`` and leaves it within one marching step."""
    c, s = math.cos(ang), math.sin(ang)
    cell = world.cell_of(x + (r + 1e-7) * c, y + (r + 1e-7) * s)
    if world.in_bounds(*cell) and not world.cells[cell[1], cell[0]]:
        return False
    step = world.cell_size / 100
    for t in np.linspace(r + 1e-7, r + step, 50):
        if world.cell_of(x + t * c, y + t * s) != cell:
            return True
    return False


def test_scan_matches_marching_oracle():
    rng = np.random.default_rng(7)
    mismatched = clips = 0
    total = 0
    for inst in range(120):
        cells = rng.random((20, 20)) < 0.15
        cells[[0, -1], :] = True
        cells[:, [0, -1]] = True
        free = np.argwhere(~cells)
        iy, ix = free[rng.integers(len(free))]
        cs = 0.5
        pose = Pose((ix + rng.random()) * cs, (iy + rng.random()) * cs, rng.uniform(-np.pi, np.pi))
        world = WorldGrid(cells, cs, pose)
        scan = simulate_scan(world, pose, 16, 6.0)
        for b, r, h in zip(scan.bearings, scan.ranges, scan.hits):
            ro, ho = _marching_range(world, pose.x, pose.y, pose.theta + b, 6.0)
            total += 1
            assert 0 < r <= 6.0
            if abs(r - ro) > cs:
                # the marcher can step over a corner the ray clips by less than one step
                assert r < ro and _corner_clip(world, pose.x, pose.y, pose.theta + b, r)
                clips += 1
                continue
            if h != ho:
                mismatched += 1
            if not h:
                assert r == 6.0
    # a miss/hit disagreement can only happen when the wall sits within one cell of max range
    assert mismatched <= 0.01 * total
    assert clips <= 0.01 * total


def test_scan_never_passes_through_occupied():
    rng = np.random.default_rng(11)
    for _ in range(100):
        cells = rng.random((20, 20)) < 0.2
        free = np.argwhere(~cells)
        iy, ix = free[rng.integers(len(free))]
        pose = Pose(ix + rng.random(), iy + rng.random(), 0.0)
        world = WorldGrid(cells, 1.0, pose)
        scan = simulate_scan(world, pose, 24, 8.0)
        for b, r in zip(scan.bearings, scan.ranges):
            c, s = math.cos(b), math.sin(b)
            for t in np.linspace(0, r - 1e-6, 200):
                assert not world.is_occupied_at(pose.x + t * c, pose.y + t * s)


def test_scan_pure():
    world = load_world(world_text("builtin:office"))
    a = simulate_scan(world, world.start)
    b = simulate_scan(world, world.start)
    assert np.array_equal(a.ranges, b.ranges) and np.array_equal(a.hits, b.hits)


def test_drift_zero_sigma_exact():
    m = DriftModel(0.0, seed=3)
    p = Pose(1.0, 2.0, 0.3)
    for _ in range(10):
        assert apply_drift(p, 0.5, m) == p


def test_drift_deterministic():
    def run():
        m = DriftModel(0.05, seed=42)
        return [apply_drift(Pose(0, 0), 0.3, m) for _ in range(20)]
    assert run() == run()


def test_drift_rejects_negative():
    with pytest.raises(ValueError):
        apply_drift(Pose(0, 0), -1.0, DriftModel(0.1))
    with pytest.raises(ValueError):
        DriftModel(-0.1)


def test_drift_monte_carlo():
    sigma = 0.01
    steps = np.full(250, 0.4)  # 100 m in 40 cm increments
    expected = sigma * math.sqrt(float((steps ** 2).sum()))
    finals = []
    for seed in range(1000):
        m = DriftModel(sigma, seed=seed)
        for d in steps:
            p = apply_drift(Pose(0, 0), float(d), m)
        finals.append((p.x, p.y))
    sd = np.asarray(finals).std(axis=0)
    assert np.all(np.abs(sd - expected) <= 0.15 * expected)
