"""Command line entry point: explore, sweep, summarize, calib."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import calibration as cal
from .global_planner import dump_regions
from .harness import (COMPLETE, EXIT_CODES, STUCK, TIMEOUT, ConfigError, EpisodeConfig, format_summary,
                      load_config, metrics_csv, read_metrics_csv, run_episode, summarize, world_text)
from .mapping import dump_map
from .world import WorldFormatError, load_world

log = logging.getLogger("hexplore")


def parse_seeds(text: str) -> list[int]:
    """``a..b`` inclusive, or a single integer."""
    if ".." in text:
        a, b = text.split("..", 1)
        lo, hi = int(a), int(b)
        if hi < lo:
            raise ValueError(f"empty seed range {text!r}")
        return list(range(lo, hi + 1))
    return [int(text)]


def _prepare(cfg: EpisodeConfig):
    # world errors should surface before any simulation
    return load_world(world_text(cfg.world))


def _write_episode(out: Path, cfg, outcome, plots: bool):
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(metrics_csv(outcome.metrics))
    (out / "map.txt").write_text(dump_map(outcome.final_map))
    (out / "regions.txt").write_text(dump_regions(outcome.regions))
    if plots:
        from .plots import episode_figure, map_figure
        episode_figure(outcome.metrics, out / "episode.png", title=f"{cfg.world} seed {cfg.seed}")
        map_figure(outcome.final_map, out / "map.png", outcome.trace)


def cmd_explore(args) -> int:
    cfg = load_config(args.config) if args.config else EpisodeConfig()
    if args.seed is not None:
        cfg = cfg.with_overrides(seed=args.seed)
    world = _prepare(cfg)
    outcome = run_episode(cfg, world, record_trace=not args.no_plots)
    _write_episode(Path(args.out), cfg, outcome, not args.no_plots)
    for k, v in outcome.metrics.summary.items():
        print(f"{k} = {v if v is not None else 'absent'}")
    return outcome.exit_code


def cmd_sweep(args) -> int:
    base = load_config(args.config) if args.config else EpisodeConfig()
    seeds = parse_seeds(args.seeds)
    world = _prepare(base)
    out = Path(args.out)
    statuses, runs = [], []
    for seed in seeds:
        cfg = base.with_overrides(seed=seed)
        outcome = run_episode(cfg, world, record_trace=not args.no_plots)
        _write_episode(out / f"seed_{seed}", cfg, outcome, not args.no_plots)
        s = outcome.metrics.summary
        print(f"seed {seed}: {s['status']} t={s['exploration_time_s']:.2f} s "
              f"explored={s['explored_pct']:.2f}%", flush=True)
        statuses.append(outcome.status)
        runs.append(outcome.metrics)
    text = format_summary(summarize(runs))
    (out / "summary.txt").write_text(text)
    print(text, end="")
    if not args.no_plots:
        from .plots import summary_figure
        summary_figure(runs, out / "summary.png", [str(s) for s in seeds])
    for st in (STUCK, TIMEOUT, COMPLETE):
        if st in statuses:
            return EXIT_CODES[st]
    return 0


def cmd_summarize(args) -> int:
    root = Path(args.dir)
    files = sorted(root.rglob("metrics.csv"))
    if not files:
        raise FileNotFoundError(f"no metrics.csv under {root}")
    runs = [read_metrics_csv(f.read_text()) for f in files]
    print(format_summary(summarize(runs)), end="")
    if not args.no_plots:
        from .plots import summary_figure
        summary_figure(runs, root / "summary.png", [f.parent.name for f in files])
    return 0


def cmd_calib(args) -> int:
    text = Path(args.file).read_text()
    if args.kind == "rigid":
        src, dst = cal.read_pairs(text)
        est = cal.estimate_rigid(src, dst)
        R, t = est.transform.rotation, est.transform.translation
        for row in R:
            print("R " + " ".join(f"{v:.9f}" for v in row))
        print("t " + " ".join(f"{v:.9f}" for v in t))
        print(f"rms {est.rms:.9g}")
        print(f"degenerate {str(est.degenerate).lower()}")
    else:
        ex = cal.read_exchanges(text)
        est = cal.estimate_clock_batch(ex)
        print(f"offset {est.offset:.12g}")
        print(f"delay {est.delay:.12g}")
        print(f"n {len(ex)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hexplore", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("explore", help="run one episode")
    e.add_argument("--config")
    e.add_argument("--out", required=True)
    e.add_argument("--seed", type=int)
    e.add_argument("--no-plots", action="store_true")
    e.set_defaults(func=cmd_explore)

    s = sub.add_parser("sweep", help="run one episode per seed")
    s.add_argument("--config")
    s.add_argument("--seeds", required=True, help="a..b inclusive")
    s.add_argument("--out", required=True)
    s.add_argument("--no-plots", action="store_true")
    s.set_defaults(func=cmd_sweep)

    m = sub.add_parser("summarize", help="mean and sd over every metrics.csv under a directory")
    m.add_argument("dir")
    m.add_argument("--no-plots", action="store_true")
    m.set_defaults(func=cmd_summarize)

    c = sub.add_parser("calib", help="calibration math on text files")
    c.add_argument("kind", choices=("rigid", "clock"))
    c.add_argument("file")
    c.set_defaults(func=cmd_calib)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, WorldFormatError, cal.InvalidExchangeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
