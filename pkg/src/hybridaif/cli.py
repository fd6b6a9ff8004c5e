"""Command-line front end: experiment sweeps, trial traces, config checks."""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_config, validate_config
from .environment import CONDITIONS, TrialSpec
from .harness import run_experiment, trace_trial


def _add_common(parser) -> None:
    parser.add_argument("--condition", choices=CONDITIONS, default="static",
                        help="which objects move (default: %(default)s)")
    parser.add_argument("--seed", type=int, default=0,
                        help="root random seed (default: %(default)s)")
    parser.add_argument("--config", metavar="PATH",
                        help="config file (defaults apply when omitted)")
    parser.add_argument("--out", metavar="DIR", default="results",
                        help="output directory (default: %(default)s)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hybridaif",
        description="Hybrid active inference on a planar tool-use task.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a seeded experiment sweep")
    _add_common(run)
    run.add_argument("--trials", type=int, default=150,
                     help="number of trials (default: %(default)s)")
    run.add_argument("--speed-min", type=float, default=0.0,
                     help="lowest object speed, px/step (default: %(default)s)")
    run.add_argument("--speed-max", type=float, default=8.0,
                     help="highest object speed, px/step (default: %(default)s)")
    run.add_argument("--workers", type=int, default=None,
                     help="worker threads (default: machine cores)")
    run.add_argument("--max-steps", type=int, default=3000,
                     help="steps per trial (default: %(default)s)")

    trace = sub.add_parser("trace", help="trace one trial in detail")
    _add_common(trace)
    trace.add_argument("--speed", type=float, default=0.0,
                       help="object speed, px/step (default: %(default)s)")
    trace.add_argument("--max-steps", type=int, default=3000,
                       help="steps to run (default: %(default)s)")
    trace.add_argument("--frame-stride", type=int, default=50,
                       help="steps between SVG frames (default: %(default)s)")

    check = sub.add_parser("validate-config", help="check a config file")
    check.add_argument("path", metavar="PATH")
    return parser


def _load(args):
    if args.config is None:
        return None
    return load_config(args.config)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "validate-config":
        problems = validate_config(args.path)
        for problem in problems:
            print(f"error: {problem}", file=sys.stderr)
        if not problems:
            print(f"{args.path}: OK")
        return 1 if problems else 0

    try:
        config = _load(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    if args.command == "run":
        rows = run_experiment(args.condition, args.trials,
                              speed_min=args.speed_min,
                              speed_max=args.speed_max, seed=args.seed,
                              config=config, out_dir=args.out,
                              workers=args.workers, max_steps=args.max_steps)
        for row in rows:
            print(f"bin {row['speed_bin']}: accuracy {row['accuracy']:.3f}, "
                  f"time {row['time_mean']:.1f}, "
                  f"error {row['error_mean']:.1f} px")
        print(f"wrote {args.out}/summary.csv")
        return 0

    spec = TrialSpec(condition=args.condition, speed=args.speed,
                     seed=args.seed, max_steps=args.max_steps)
    result = trace_trial(spec, config=config, out_dir=args.out,
                         frame_stride=args.frame_stride)
    outcome = "success" if result.success else "failure"
    print(f"{outcome}: grasp at {result.grasp_time}, "
          f"completion at {result.completion_time}, "
          f"final error {result.final_error:.1f} px")
    print(f"wrote {args.out}/trace.csv")
    return 0


if __name__ == "__main__":
    sys.exit(main())
