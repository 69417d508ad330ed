"""Command-line front end for the retrieval refinement pipeline.

Every subcommand resolves one config (file, profile preset, flag
overrides), operates on a run directory, prints a machine-readable
summary line, and exits 0 on success.  Failures map to stable exit
codes: 2 config/argument, 3 missing stage input, 4 bad data, 5 oracle
transport, 6 oracle protocol, 7 training divergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import pipeline
from .config import apply_profile, load_config
from .errors import (ArgumentError, ConfigError, DataError, DomainError,
                     MissingInputError, OracleProtocolError,
                     OracleTransportError, ShapeError, TrainingDivergedError)

EXIT_CONFIG = 2
EXIT_MISSING_INPUT = 3
EXIT_DATA = 4
EXIT_TRANSPORT = 5
EXIT_PROTOCOL = 6
EXIT_DIVERGED = 7


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="JSON config file (defaults used when omitted)")
    common.add_argument("--out", metavar="DIR",
                        help="run directory (default: runs/<hash>-<timestamp>)")
    common.add_argument("--seed", type=int, metavar="N",
                        help="override the top-level seed")
    common.add_argument("--profile", choices=("fashioniq", "cirr"),
                        help="apply a hyperparameter preset")
    common.add_argument("--oracle-url", metavar="URL",
                        help="oracle service url (env RECALL_FORGE_ORACLE_URL "
                             "is the fallback)")

    parser = argparse.ArgumentParser(
        prog="recall-forge",
        description="diagnose-generate-refine pipeline for composed retrieval")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("gen-world", parents=[common],
                   help="generate the synthetic world")
    sub.add_parser("train-base", parents=[common],
                   help="stage 1: contrastive baseline adaptation")
    p_mine = sub.add_parser("mine", parents=[common],
                            help="stage 2: informative-instance mining")
    p_mine.add_argument("--strategy", choices=("self_guided", "random"),
                        help="override the configured mining strategy")
    sub.add_parser("calibrate", parents=[common],
                   help="stage 3: corrective synthesis + consistency filter")
    sub.add_parser("refine", parents=[common],
                   help="stage 4: grouped contrastive refinement")
    p_eval = sub.add_parser("evaluate", parents=[common],
                            help="compute recall metrics for a snapshot")
    p_eval.add_argument("--snapshot", choices=("base", "refined", "all"),
                        default="all", help="which snapshot to evaluate")
    sub.add_parser("pipeline", parents=[common], help="run all stages")
    sub.add_parser("report", parents=[common],
                   help="render metrics and filter statistics as text")
    return parser


def _resolve_config(args) -> dict:
    config_path = args.config
    if config_path is None and args.out:
        pinned = Path(args.out) / "config.json"
        if pinned.exists():
            config_path = pinned
    cfg = load_config(config_path)
    if args.profile:
        cfg = apply_profile(cfg, args.profile)
    if args.seed is not None:
        cfg["seed"] = int(args.seed)
    return cfg


def _emit(summary) -> None:
    print(json.dumps(summary, sort_keys=True))


def _dispatch(args) -> int:
    cfg = _resolve_config(args)
    if args.command == "mine" and getattr(args, "strategy", None):
        cfg["mining"]["strategy"] = args.strategy
    run = pipeline.init_run_dir(cfg, args.out)

    if args.command == "gen-world":
        _emit(pipeline.stage_gen_world(cfg, run))
    elif args.command == "train-base":
        _emit(pipeline.stage_train_base(cfg, run))
    elif args.command == "mine":
        _emit(pipeline.stage_mine(cfg, run))
    elif args.command == "calibrate":
        _emit(pipeline.stage_calibrate(cfg, run, args.oracle_url))
    elif args.command == "refine":
        _emit(pipeline.stage_refine(cfg, run))
    elif args.command == "evaluate":
        targets = ("base", "refined") if args.snapshot == "all" else (args.snapshot,)
        done = []
        for which in targets:
            if args.snapshot == "all" and not (
                    run / "snapshots" / f"{which}.json").exists():
                continue
            done.append(which)
            _emit({which: pipeline.stage_evaluate(cfg, run, which)})
        if not done:
            raise MissingInputError(
                "no snapshots to evaluate; run train-base or refine first")
    elif args.command == "pipeline":
        _emit(pipeline.run_pipeline(cfg, run, args.oracle_url))
    elif args.command == "report":
        print(pipeline.stage_report(cfg, run), end="")
    else:
        raise ArgumentError(f"unknown command {args.command!r}")
    return 0


def _fail(code: int, exc: Exception) -> int:
    print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
          file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except (ConfigError, ArgumentError, ShapeError, DomainError) as exc:
        return _fail(EXIT_CONFIG, exc)
    except MissingInputError as exc:
        return _fail(EXIT_MISSING_INPUT, exc)
    except OracleTransportError as exc:
        return _fail(EXIT_TRANSPORT, exc)
    except OracleProtocolError as exc:
        return _fail(EXIT_PROTOCOL, exc)
    except TrainingDivergedError as exc:
        return _fail(EXIT_DIVERGED, exc)
    except DataError as exc:
        return _fail(EXIT_DATA, exc)


if __name__ == "__main__":
    sys.exit(main())
