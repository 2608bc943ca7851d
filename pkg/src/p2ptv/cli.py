"""Command line entry point: ``p2ptv simulate`` for one rounds value, ``p2ptv sweep`` for several."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import load_config
from .harness import TABLE1_ROUNDS, emit_outputs, sweep_rounds, trace_trial, write_inputs, write_trace


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _rounds_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of integers: {text!r}") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("rounds must be positive integers")
    return values


def _assignment(text: str) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    return key.strip(), value.strip()


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="TOML file of dotted keys, e.g. pricing.micro_step = 0.01")
    common.add_argument("--trials", type=int)
    common.add_argument("--seed", type=int, help="base seed; trial i uses seed + i")
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--wtp-mode", choices=("staircase", "random"))
    common.add_argument("--unicast-only", action="store_true", help="disable peer serving in both arms")
    common.add_argument("--no-incentives", action="store_true", help="set the incentive rate to 0")
    common.add_argument("--workers", type=int)
    common.add_argument("--set", dest="overrides", action="append", type=_assignment, default=[],
                        metavar="KEY=VALUE", help="override any dotted config key")
    common.add_argument("--trace", action="store_true", help="write trace.csv for the first trial")
    common.add_argument("--dump-inputs", action="store_true",
                        help="write elasticity.csv and wtp.csv for the first trial")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="p2ptv", description="P2PTV pricing and incentive simulator")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sim = sub.add_parser("simulate", parents=[common], help="run one rounds value")
    sim.add_argument("--rounds", type=int)
    sweep = sub.add_parser("sweep", parents=[common], help="run a list of rounds values")
    sweep.add_argument("--rounds-list", type=_rounds_list, default=list(TABLE1_ROUNDS))
    return parser


def config_from_args(args):
    overrides = dict(args.overrides)
    flags = {
        "experiment.trials": args.trials,
        "experiment.base_seed": args.seed,
        "experiment.wtp_mode": args.wtp_mode,
        "experiment.workers": args.workers,
        "experiment.rounds": getattr(args, "rounds", None),
    }
    overrides.update({k: v for k, v in flags.items() if v is not None})
    if args.unicast_only:
        overrides["settlement.peer_serving"] = False
    if args.no_incentives:
        overrides["settlement.incentive_rate"] = 0.0
    return load_config(args.config, overrides)


def run(argv=None) -> dict:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    cfg = config_from_args(args)
    rounds_list = [cfg.rounds] if args.command == "simulate" else args.rounds_list
    rows, results = sweep_rounds(cfg, rounds_list)
    emit_outputs(rows, results, args.out, cfg)
    if args.trace:
        write_trace(trace_trial(cfg.replace(rounds=max(rounds_list)), cfg.base_seed), f"{args.out}/trace.csv")
    if args.dump_inputs:
        write_inputs(cfg, cfg.base_seed, args.out)
    return {"out": str(args.out), "rows": len(rows), "trials": cfg.trials}


def main(argv=None) -> int:
    try:
        summary = run(argv)
    except (CliError, ValueError, KeyError, OSError) as exc:
        kind = "usage" if isinstance(exc, CliError) else type(exc).__name__
        message = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
        print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
        return 2
    print(json.dumps(summary))
    return 0


if __name__ == "__main__":
    sys.exit(main())
