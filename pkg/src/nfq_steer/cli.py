"""``nfq-steer`` command line.

Exit status is 0 on success.  On failure a single line
``nfq-steer: error: <category>: <message>`` goes to stderr and the status
is 2 (bad input or configuration), 3 (I/O) or 4 (training diverged).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import harness
from .config import ENVIRONMENTS, PROFILES, load_config
from .errors import NfqError, TrainingDivergedError


def _global_flags(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", metavar="PATH", default=default, help="JSON config file")
    parser.add_argument("--seed", type=int, metavar="N", default=default, help="master seed (default 0)")
    parser.add_argument("--out", metavar="DIR", default=default, help="output directory")
    parser.add_argument("--profile", choices=sorted(PROFILES), default=default)
    parser.add_argument("--env", choices=ENVIRONMENTS, default=default)
    parser.add_argument("--set", dest="overrides", action="append", metavar="KEY=VALUE",
                        default=argparse.SUPPRESS if suppress else [],
                        help="override a config value, e.g. nfq.gamma=0.98 (repeatable)")
    parser.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS if suppress else 0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nfq-steer", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help):
        p = sub.add_parser(name, help=help)
        _global_flags(p, suppress=True)
        return p

    p = add("collect", "log random-action transitions from the physics plant")
    p.add_argument("--steps", type=int, default=10_000)
    p.add_argument("--log", metavar="PATH", help="output file (default OUT/transitions.csv)")

    p = add("train", "run growing-batch NFQ and write metrics, checkpoints and a summary")
    p.add_argument("--dataset", metavar="PATH", help="transition log for --env replay")

    p = add("eval", "greedy rollouts of a checkpoint")
    p.add_argument("--checkpoint", required=True, metavar="PATH")
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--dataset", metavar="PATH", help="transition log for --env replay")

    p = add("compare", "paired physics vs replay rollouts from identical initial states")
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--dataset", metavar="PATH", help="transition log for the replay simulator")
    p.add_argument("--checkpoint", metavar="PATH", help="greedy policy (default: random actions)")

    p = add("export-plots", "turn a metrics file into plot-ready series")
    p.add_argument("metrics", metavar="METRICS_CSV")
    p.add_argument("--window", type=int, default=20)
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = list(args.overrides)
    if getattr(args, "dataset", None):
        overrides.append(f"replay_dataset={json.dumps(args.dataset)}")
    config = load_config(args.config, profile=args.profile, env=args.env, seed=args.seed,
                         out=args.out, overrides=overrides)
    if args.command == "collect":
        path = harness.cmd_collect(config, args.steps, args.log)
        print(path)
    elif args.command == "train":
        outcome = harness.cmd_train(config)
        s = outcome.summary
        print(f"episodes={s['episodes']} successes={s['successes']} "
              f"first_quarter_cost={s['first_quarter_mean_cost']:.4f} "
              f"last_quarter_cost={s['last_quarter_mean_cost']:.4f} -> {outcome.summary_path}")
    elif args.command == "eval":
        report = harness.cmd_eval(args.checkpoint, config, args.episodes)
        print(json.dumps(report, sort_keys=True))
    elif args.command == "compare":
        report = harness.cmd_compare(config, args.episodes, args.checkpoint)
        print(json.dumps({k: v for k, v in report.items() if k != "dumps"}, sort_keys=True))
    elif args.command == "export-plots":
        for path in harness.cmd_export_plots(args.metrics, args.out, args.window):
            print(path)
    return 0


def main(argv=None) -> int:
    try:
        return run(argv)
    except TrainingDivergedError as exc:
        print(f"nfq-steer: error: {exc.category}: {exc}", file=sys.stderr)
        return 4
    except NfqError as exc:
        print(f"nfq-steer: error: {exc.category}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"nfq-steer: error: io: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
