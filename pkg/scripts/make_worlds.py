"""Regenerate the bundled world files under src/hexplore/worlds/."""

from pathlib import Path

import numpy as np

from hexplore.world import Pose, WorldGrid, dump_world

OUT = Path(__file__).resolve().parents[1] / "src" / "hexplore" / "worlds"
CS = 0.25


def box(cells, x0, y0, x1, y1):
    """Fill cells x0..x1, y0..y1 inclusive."""
    cells[y0:y1 + 1, x0:x1 + 1] = True


def border(w, h):
    c = np.zeros((h, w), dtype=bool)
    c[0, :] = c[-1, :] = True
    c[:, 0] = c[:, -1] = True
    return c


def world(cells, sx, sy):
    return WorldGrid(cells, CS, Pose((sx + 0.5) * CS, (sy + 0.5) * CS, 0.0))


def office():
    # 50 m x 20 m: a 3 m corridor along x with six 8 m x 8 m rooms on each side
    w, h = 200, 80
    c = border(w, h)
    lo_wall, hi_wall = 33, 46
    c[lo_wall, :] = True
    c[hi_wall, :] = True
    partitions = [33, 66, 99, 132, 165]
    for x in partitions:
        c[:lo_wall, x] = True
        c[hi_wall:, x] = True
    edges = [0] + partitions + [w - 1]
    rng = np.random.default_rng(7)
    for i, (a, b) in enumerate(zip(edges, edges[1:])):
        for wall_y, inside in ((lo_wall, (1, lo_wall - 1)), (hi_wall, (hi_wall + 1, h - 2))):
            door = int(rng.integers(a + 4, b - 10))
            c[wall_y, door:door + 6] = False
            # a desk and a cabinet per room, kept off the doorway
            y0, y1 = inside
            dx = int(rng.integers(a + 6, b - 12))
            dy = int(rng.integers(y0 + 8, y1 - 10))
            box(c, dx, dy, dx + 7, dy + 2)
            cab_x = a + 1 if i % 2 else b - 2  # flush with the partition, no blind slot
            cab_y = y0 + 2 if wall_y == hi_wall else y1 - 5
            box(c, cab_x, cab_y, cab_x + 1, cab_y + 3)
    # pillars along the corridor
    for x in (50, 100, 150):
        box(c, x, 39, x + 1, 40)
    return world(c, 5, 40)


def tiny():
    # 5 m x 5 m empty room
    return world(border(20, 20), 10, 10)


def sealed():
    # 12 m x 8 m hall with a closed 3 m x 3 m room that has no door
    w, h = 48, 32
    c = border(w, h)
    box(c, 30, 10, 42, 10)
    box(c, 30, 22, 42, 22)
    box(c, 30, 10, 30, 22)
    box(c, 42, 10, 42, 22)
    box(c, 12, 14, 14, 18)
    return world(c, 6, 6)


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    for name, fn in (("office", office), ("tiny", tiny), ("sealed", sealed)):
        (OUT / f"{name}.world").write_text(dump_world(fn()))
        print("wrote", OUT / f"{name}.world")
