"""Command-line entry point.

    scoutsim run --world W --method M --seed S --duration T --out DIR
    scoutsim compare --runs DIR --report FILE
    scoutsim worlds list

Exit codes: 0 success, 2 trial failed, 3 configuration error.
"""

from __future__ import annotations

import argparse
import sys

EXIT_OK = 0
EXIT_TRIAL_FAILED = 2
EXIT_CONFIG_ERROR = 3


def build_parser():
    p = argparse.ArgumentParser(prog="scoutsim",
                                description="2D active-exploration simulator")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one trial")
    run.add_argument("--world", required=True,
                     help="bundled world name or world PGM path")
    run.add_argument("--method", required=True)
    run.add_argument("--seed", type=int, required=True)
    run.add_argument("--duration", type=float, required=True,
                     help="trial length, simulated seconds")
    run.add_argument("--out", required=True, help="artifact directory")
    run.add_argument("--config", help="optional key=value parameter file")

    cmp_ = sub.add_parser("compare", help="aggregate archived runs")
    cmp_.add_argument("--runs", required=True)
    cmp_.add_argument("--report", required=True)
    cmp_.add_argument("--reference", default="A",
                      help="method for relative path-length deltas")

    w = sub.add_parser("worlds", help="world utilities")
    w.add_argument("action", choices=["list"])
    return p


def main(argv=None):
    from scoutsim import compare, methods, metrics, worlds
    from scoutsim.config import ConfigError, SimParams
    from scoutsim.world import WorldError

    args = build_parser().parse_args(argv)
    try:
        if args.command == "worlds":
            for name in worlds.WORLD_NAMES:
                print(name)
            return EXIT_OK

        if args.command == "run":
            from scoutsim.trial import run_trial
            if args.method not in methods.METHODS:
                print(f"error: unknown method {args.method!r}; choose from "
                      f"{', '.join(sorted(methods.METHODS))}", file=sys.stderr)
                return EXIT_CONFIG_ERROR
            if args.duration <= 0:
                print("error: duration must be positive", file=sys.stderr)
                return EXIT_CONFIG_ERROR
            params = SimParams.load(args.config) if args.config else SimParams()
            result = run_trial(args.world, args.method, args.seed,
                               args.duration, out_dir=args.out, params=params)
            print(f"trial {args.world}/{args.method}/seed{args.seed}: "
                  f"{result.status} -> {result.out_dir}")
            return EXIT_OK if result.status == metrics.STATUS_OK \
                else EXIT_TRIAL_FAILED

        if args.command == "compare":
            cells, malformed = compare.collect_runs(args.runs)
            if not cells:
                print(f"error: no trial summaries under {args.runs}",
                      file=sys.stderr)
                return EXIT_CONFIG_ERROR
            for path in malformed:
                print(f"warning: skipping malformed summary {path}",
                      file=sys.stderr)
            compare.write_report(cells, args.report, reference=args.reference)
            print(f"report written to {args.report}")
            return EXIT_OK
    except (ConfigError, WorldError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
