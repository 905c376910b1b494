import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hexplore.harness import world_text
from hexplore.mapping import (FREE, OCCUPIED, UNKNOWN, OccupancyGrid, coverage, detect_frontiers, dump_map,
                              frontier_mask, integrate_scan, load_map)
from hexplore.world import LidarScan, Pose, WorldGrid, load_world, simulate_scan


def _beam(pose, bearing, rng, hit, max_range=5.0):
    return LidarScan(pose, np.array([bearing]), np.array([rng]), np.array([hit]), max_range)


def test_single_beam():
    g = OccupancyGrid.empty(10, 10, 0.5)
    integrate_scan(g, _beam(Pose(1.25, 2.25), 0.0, 2.0, True))
    row = g.states[4]
    assert list(row[2:6]) == [FREE] * 4
    assert row[6] == OCCUPIED
    assert np.count_nonzero(g.states != UNKNOWN) == 5


def test_miss_beam_leaves_end_unknown():
    g = OccupancyGrid.empty(10, 10, 0.5)
    integrate_scan(g, _beam(Pose(1.25, 2.25), 0.0, 2.0, False))
    assert list(g.states[4, 2:6]) == [FREE] * 4
    assert g.states[4, 6] == UNKNOWN


def test_occupied_wins_within_scan():
    g = OccupancyGrid.empty(10, 10, 1.0)
    # one beam passes through (6, 4), another terminates there
    scan = LidarScan(Pose(2.5, 4.5), np.array([0.0, 0.0]), np.array([6.0, 4.0]),
                     np.array([True, True]), 8.0)
    integrate_scan(g, scan)
    assert g.states[4, 6] == OCCUPIED
    # and a later scan never clears it
    integrate_scan(g, _beam(Pose(2.5, 4.5), 0.0, 6.0, True))
    assert g.states[4, 6] == OCCUPIED


def test_origin_outside_bounds():
    g = OccupancyGrid.empty(4, 4, 1.0)
    with pytest.raises(ValueError):
        integrate_scan(g, _beam(Pose(-0.5, 1.0), 0.0, 1.0, True))


def test_idempotent():
    world = load_world(world_text("builtin:office"))
    scan = simulate_scan(world, world.start)
    a = integrate_scan(OccupancyGrid.like(world), scan)
    b = integrate_scan(a.copy(), scan)
    assert np.array_equal(a.states, b.states)


def test_disk_area():
    world = WorldGrid(np.zeros((60, 60), dtype=bool), 0.25, Pose(7.5, 7.5))
    g = integrate_scan(OccupancyGrid.like(world), simulate_scan(world, world.start, 720, 3.0))
    area = np.count_nonzero(g.states != UNKNOWN) * 0.25 ** 2
    assert abs(area - math.pi * 9) <= 0.05 * math.pi * 9
    assert not (g.states == OCCUPIED).any()


def test_frontiers_trivial():
    g = OccupancyGrid.empty(5, 5, 1.0)
    assert detect_frontiers(g) == []
    g.states[:] = FREE
    assert detect_frontiers(g) == []


def _brute_frontiers(states):
    h, w = states.shape
    out = []
    for iy in range(h):
        for ix in range(w):
            if states[iy, ix] != FREE:
                continue
            for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                x, y = ix + dx, iy + dy
                if 0 <= x < w and 0 <= y < h and states[y, x] == UNKNOWN:
                    out.append((ix, iy))
                    break
    return out


def test_frontiers_match_definition():
    rng = np.random.default_rng(5)
    for _ in range(100):
        g = OccupancyGrid(rng.integers(0, 3, (30, 30)).astype(np.int8), 0.25)
        got = detect_frontiers(g)
        assert [(f.ix, f.iy) for f in got] == sorted(_brute_frontiers(g.states), key=lambda c: (c[1], c[0]))
        for f in got:
            assert (f.x, f.y) == g.center_of(f.ix, f.iy)


def test_stale_frontier_disappears():
    g = OccupancyGrid.empty(3, 1, 1.0)
    g.states[0, 0] = FREE
    assert [(f.ix, f.iy) for f in detect_frontiers(g)] == [(0, 0)]
    g.states[0, 1] = OCCUPIED
    assert detect_frontiers(g) == []


HALF_CORRIDOR = "8 4 1.0\n########\n#S...#.#\n#....#.#\n########\n"


def test_coverage_hand_count():
    world = load_world(HALF_CORRIDOR)
    g = OccupancyGrid.like(world)
    assert coverage(g, world).explored_pct == 0.0
    g.states[world.cells] = OCCUPIED
    g.states[1:3, 1:3] = FREE  # four reachable cells
    g.states[2, 3] = FREE  # a fifth
    g.states[1:3, 6] = FREE  # sealed pocket, not reachable from S
    rep = coverage(g, world)
    # 5 of the 8 reachable cells
    assert rep.explored_pct == 62.5
    assert rep.explored_area == 5.0
    assert rep.explored_volume == 15.0


def test_coverage_full_and_mismatch():
    world = load_world(HALF_CORRIDOR)
    g = OccupancyGrid.like(world)
    g.states[:] = np.where(world.cells, OCCUPIED, FREE)
    assert coverage(g, world).explored_pct == 100.0
    with pytest.raises(ValueError):
        coverage(OccupancyGrid.empty(4, 4, 1.0), world)


def test_map_text_roundtrip():
    rng = np.random.default_rng(0)
    g = OccupancyGrid(rng.integers(0, 3, (7, 9)).astype(np.int8), 0.25)
    assert np.array_equal(load_map(dump_map(g)).states, g.states)


def _office_scans(seed, n):
    world = load_world(world_text("builtin:office"))
    rng = np.random.default_rng(seed)
    free = np.argwhere(~world.cells)
    scans = []
    for iy, ix in free[rng.choice(len(free), n, replace=False)]:
        x, y = world.center_of(ix, iy)
        scans.append(simulate_scan(world, Pose(x, y, rng.uniform(-3, 3)), 180, 8.0))
    return world, scans


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.randoms(use_true_random=False))
def test_frontiers_independent_of_scan_order(seed, rnd):
    world, scans = _office_scans(seed, 5)
    a = OccupancyGrid.like(world)
    for s in scans:
        integrate_scan(a, s)
    b = OccupancyGrid.like(world)
    order = list(range(len(scans)))
    rnd.shuffle(order)
    for i in order:
        integrate_scan(b, scans[i])
    assert np.array_equal(frontier_mask(a), frontier_mask(b))
    assert detect_frontiers(a) == detect_frontiers(b)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_knowledge_monotone(seed):
    world, scans = _office_scans(seed, 6)
    g = OccupancyGrid.like(world)
    prev_states = g.states.copy()
    prev_pct = 0.0
    for s in scans:
        integrate_scan(g, s)
        assert not ((prev_states != UNKNOWN) & (g.states == UNKNOWN)).any()
        assert not ((prev_states == OCCUPIED) & (g.states != OCCUPIED)).any()
        pct = coverage(g, world).explored_pct
        assert prev_pct <= pct <= 100.0
        prev_states, prev_pct = g.states.copy(), pct
