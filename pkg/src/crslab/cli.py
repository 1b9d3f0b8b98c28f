"""Batch experiment runner.

Subcommands: run, validate, list-schemes, list-matroids. Configs are JSON;
outputs are CSV + summary.json (+ PNG figures) in the output directory, which
defaults to $CRSLAB_OUTPUT_DIR or ./crslab-out. Exit codes: 0 success,
2 validation failure, 3 runtime contract violation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import ConfigError, IndependenceViolation, MatroidContractError
from .experiments import (
    EXPERIMENT_KINDS,
    OUTPUT_DIR_ENV,
    config_hash,
    resolve_config,
    run_experiment,
    validate_config,
)
from .matroids import MATROID_FAMILIES
from .schemes import SCHEME_KINDS

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CONTRACT = 3


def _error(kind, message):
    json.dump({"error": {"type": kind, "message": str(message)}}, sys.stderr)
    sys.stderr.write("\n")


def _load_config(path):
    with open(path) as fh:
        return json.load(fh)


def _default_output_dir():
    return os.environ.get(OUTPUT_DIR_ENV, "crslab-out")


def _cmd_run(args):
    try:
        config = _load_config(args.config)
    except (OSError, json.JSONDecodeError) as exc:
        _error("config_parse", exc)
        return EXIT_VALIDATION
    config = resolve_config(config, seed=args.seed, trials=args.trials)
    diags = validate_config(config)
    if diags:
        _error("validation", "; ".join(diags))
        return EXIT_VALIDATION
    out_dir = args.output_dir or config.get("output_dir") or _default_output_dir()
    out_dir = Path(out_dir) / f"{config['kind']}_{config_hash(config)}"
    try:
        result = run_experiment(
            config, out_dir, workers=args.workers, figures=args.figures
        )
    except ConfigError as exc:
        _error("validation", exc)
        return EXIT_VALIDATION
    except (IndependenceViolation, MatroidContractError) as exc:
        _error("contract_violation", exc)
        return EXIT_CONTRACT
    print(
        json.dumps(
            {
                "summary": str(result.summary_path),
                "csv": [str(p) for p in result.csv_paths],
                "figures": [str(p) for p in result.figure_paths],
                "config_hash": result.summary["config_hash"],
            },
            sort_keys=True,
        )
    )
    return EXIT_OK


def _cmd_validate(args):
    try:
        config = _load_config(args.config)
    except (OSError, json.JSONDecodeError) as exc:
        _error("config_parse", exc)
        return EXIT_VALIDATION
    diags = validate_config(resolve_config(config))
    print(json.dumps({"diagnostics": diags}, sort_keys=True))
    return EXIT_OK if not diags else EXIT_VALIDATION


def _cmd_list_schemes(args):
    for kind, cls in sorted(SCHEME_KINDS.items()):
        doc = (cls.__doc__ or "").strip().splitlines()[0]
        print(f"{kind}: {doc}")
    return EXIT_OK


def _cmd_list_matroids(args):
    notes = {
        "uniform": "fields: n, r",
        "laminar": "fields: n, sets, capacities",
        "graphic": "fields: num_vertices, edges",
        "transversal": "fields: adjacency, num_right",
        "explicit": "fields: n, independent_sets",
    }
    for family in MATROID_FAMILIES:
        print(f"{family}: {notes[family]}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="crslab",
        description="contention-resolution-scheme laboratory experiment runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help=f"run one experiment ({', '.join(EXPERIMENT_KINDS)})")
    run_p.add_argument("config", help="path to the JSON experiment config")
    run_p.add_argument("--output-dir", help=f"report directory (default ${OUTPUT_DIR_ENV} or ./crslab-out)")
    run_p.add_argument("--seed", type=int, help="override the config's master seed")
    run_p.add_argument("--trials", type=int, help="override the config's trial count")
    run_p.add_argument("--workers", type=int, default=1, help="worker processes; never changes outputs")
    run_p.add_argument(
        "--figures",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="render PNG figures alongside the CSV output",
    )
    run_p.set_defaults(func=_cmd_run)

    val_p = sub.add_parser("validate", help="static config diagnostics, no work performed")
    val_p.add_argument("config")
    val_p.set_defaults(func=_cmd_validate)

    sub.add_parser("list-schemes", help="available scheme kinds").set_defaults(
        func=_cmd_list_schemes
    )
    sub.add_parser("list-matroids", help="available matroid families").set_defaults(
        func=_cmd_list_matroids
    )
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
