"""Command line front end: serve, trial, buildmap, bench."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from wheelnav.arbiter import Mode


def _parse_seeds(text: str) -> tuple[int, int]:
    """'a..b' inclusive; a bare integer means a single seed."""
    if ".." in text:
        lo_s, hi_s = text.split("..", 1)
        lo, hi = int(lo_s), int(hi_s)
    else:
        lo = hi = int(text)
    if hi < lo:
        raise argparse.ArgumentTypeError(f"empty seed range {text!r}")
    return lo, hi


def cmd_serve(args: argparse.Namespace) -> int:
    from wheelnav.gateway import GatewayConfig, serve

    serve(
        GatewayConfig(
            world=args.world,
            map_path=args.map,
            mode=args.mode,
            port=args.port,
            seed=args.seed,
            headless=args.headless,
            speed=args.speed,
            record_dir=args.record,
        )
    )
    return 0


def cmd_trial_run(args: argparse.Namespace) -> int:
    from wheelnav.trials import (
        SUITES,
        build_world_map,
        render_csv,
        render_summary,
        run_suite,
    )
    from wheelnav.world import resolve_world

    if args.suite not in SUITES:
        sys.stderr.write(
            f"unknown suite {args.suite!r}; choose from {', '.join(sorted(SUITES))}\n"
        )
        return 2
    spec = resolve_world(args.world)
    lo, hi = args.seeds
    out_dir = Path(args.out) if args.out else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    occ_map, goals = build_world_map(spec)
    records, summary = run_suite(
        spec,
        args.suite,
        trials=hi - lo + 1,
        base_seed=lo,
        occ_map=occ_map,
        goals=goals,
        collect_ticks=out_dir is not None,
    )

    text = render_summary(args.suite, summary)
    sys.stdout.write(text)
    if out_dir is not None:
        (out_dir / "report.csv").write_text(render_csv(records), encoding="utf-8")
        (out_dir / "summary.txt").write_text(text, encoding="utf-8")
        for r in records:
            log = out_dir / f"trial_{r.trial_no:02d}.jsonl"
            log.write_text("\n".join(r.tick_log) + "\n", encoding="utf-8")

    threshold = SUITES[args.suite].pass_threshold
    return 0 if summary.success_rate >= threshold else 1


def cmd_buildmap(args: argparse.Namespace) -> int:
    from wheelnav.mapping import save_map
    from wheelnav.trials import build_world_map
    from wheelnav.world import resolve_world

    spec = resolve_world(args.world)
    occ_map, goals = build_world_map(spec)
    save_map(args.out, occ_map, goals)
    sys.stdout.write(f"wrote {args.out} ({occ_map.width}x{occ_map.height} cells)\n")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    from wheelnav.bench import render_table, run_bench

    sys.stdout.write(render_table(run_bench(args.repeats)) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wheelnav",
        description="Shared-control wheelchair navigation simulator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    serve_p = sub.add_parser("serve", help="run the live operator gateway")
    serve_p.add_argument("--world", required=True, help="world file or bundled name")
    serve_p.add_argument("--map", default=None, help="prebuilt map file to localize on")
    serve_p.add_argument(
        "--mode", default=Mode.AUTONOMOUS.value, choices=[m.value for m in Mode]
    )
    serve_p.add_argument("--port", type=int, default=8732)
    serve_p.add_argument("--seed", type=int, default=0)
    serve_p.add_argument(
        "--headless", action="store_true", help="tick as fast as possible"
    )
    serve_p.add_argument(
        "--speed", type=float, default=1.0, help="real-time multiplier"
    )
    serve_p.add_argument("--record", default=None, metavar="DIR", help="tick log dir")
    serve_p.set_defaults(fn=cmd_serve)

    trial_p = sub.add_parser("trial", help="run scripted trial suites")
    trial_sub = trial_p.add_subparsers(dest="trial_command", required=True)
    run_p = trial_sub.add_parser("run", help="run one suite and write reports")
    run_p.add_argument("--world", required=True, help="world file or bundled name")
    run_p.add_argument("--suite", required=True)
    run_p.add_argument(
        "--seeds", type=_parse_seeds, default=(0, 9), help="inclusive range a..b"
    )
    run_p.add_argument("--out", default=None, metavar="DIR")
    run_p.set_defaults(fn=cmd_trial_run)

    map_p = sub.add_parser("buildmap", help="survey a world into a map file")
    map_p.add_argument("--world", required=True, help="world file or bundled name")
    map_p.add_argument("--out", required=True, help="map file to write")
    map_p.set_defaults(fn=cmd_buildmap)

    bench_p = sub.add_parser("bench", help="time the kernel backends")
    bench_p.add_argument("--repeats", type=int, default=5)
    bench_p.set_defaults(fn=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
