"""Command-line entry point.

    fecsim run <config> [--seed N] [--out dir]
    fecsim compare <config...> --out dir
    fecsim trace synth <spec> --out file
    fecsim hull {quick|bfp} <positions.csv> [--strips N]

Exit codes: 0 success, 2 configuration error, 3 I/O failure.  Log verbosity
comes from the FECSIM_LOG_LEVEL environment variable.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import yaml

from . import harness
from .harness import ConfigError
from .netstate import bfp_hull, quickhull, read_snapshot
from .video import GopLayout, synthesize_video, write_trace

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3


def _cmd_run(args) -> int:
    cfg = harness.load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    reports = harness.run_scenario(cfg)
    if args.out:
        harness.write_outputs(reports, args.out, cfg.name)
    sys.stdout.write(harness.reports_to_csv(reports))
    return EXIT_OK


def _cmd_compare(args) -> int:
    configs = [harness.load_config(p) for p in args.configs]
    reports = harness.compare_mechanisms(configs)
    harness.write_outputs(reports, args.out, "comparison")
    sys.stdout.write(harness.reports_to_csv(reports))
    return EXIT_OK


_TRACE_KEYS = {f.name for f in dataclasses.fields(harness.TraceSource)} - {"file"}


def _cmd_trace(args) -> int:
    text = Path(args.spec).read_text()
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError([f"{args.spec}: not valid YAML ({exc})"]) from None
    if not isinstance(data, dict):
        raise ConfigError(["trace spec: expected a mapping"])
    unknown = sorted(set(data) - _TRACE_KEYS)
    if unknown:
        raise ConfigError([f"{k}: unknown key" for k in unknown])
    src = harness.TraceSource(**data)
    if src.gops < 1 or not 1 <= src.m_ratio <= src.n_ratio:
        raise ConfigError(["trace spec: need gops >= 1 and 1 <= m_ratio <= n_ratio"])
    try:
        trace, _ = synthesize_video(GopLayout(src.n_ratio, src.m_ratio), src.gops, src.motion,
                                    src.seed or 0, src.width, src.height, with_pixels=False)
    except ValueError as exc:
        raise ConfigError([f"trace spec: {exc}"]) from None
    write_trace(trace, args.out)
    print(f"wrote {len(trace)} frames to {args.out}")
    return EXIT_OK


def _cmd_hull(args) -> int:
    snap = read_snapshot(args.positions)
    points = [(p.x, p.y) for p in snap.positions]
    hull = quickhull(points) if args.method == "quick" else bfp_hull(points, args.strips)
    print(f"# {args.method} hull: {len(hull.vertices)} vertices, area {hull.area:.6f}"
          + (" (degenerate)" if hull.degenerate else ""))
    for x, y in hull.vertices:
        print(f"{x!r},{y!r}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fecsim", description="Adaptive FEC video transmission simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario")
    run.add_argument("config")
    run.add_argument("--seed", type=int)
    run.add_argument("--out")
    run.set_defaults(func=_cmd_run)

    cmp_ = sub.add_parser("compare", help="paired comparison of several mechanisms")
    cmp_.add_argument("configs", nargs="+")
    cmp_.add_argument("--out", required=True)
    cmp_.set_defaults(func=_cmd_compare)

    trace = sub.add_parser("trace", help="frame trace utilities")
    tsub = trace.add_subparsers(dest="trace_command", required=True)
    synth = tsub.add_parser("synth", help="write a synthetic frame trace")
    synth.add_argument("spec")
    synth.add_argument("--out", required=True)
    synth.set_defaults(func=_cmd_trace)

    hull = sub.add_parser("hull", help="convex hull of a node-position CSV")
    hull.add_argument("method", choices=["quick", "bfp"])
    hull.add_argument("positions")
    hull.add_argument("--strips", type=int, default=64)
    hull.set_defaults(func=_cmd_hull)
    return ap


def main(argv=None) -> int:
    harness.configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for p in exc.problems:
            print(f"config error: {p}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        # malformed input files (trace, snapshot, loss trace) surface as ValueError
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())
