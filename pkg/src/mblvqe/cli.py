"""Command-line experiment runner.

Every experiment is a subcommand; configuration comes from an INI file
(--config), individual --override section.key=value flags, and --seed/--out/
--workers. Exit codes: 0 success, 2 bad configuration, 3 resource limit,
4 every trial failed.
"""

from __future__ import annotations

import argparse
import sys

from .experiments import (
    EXPERIMENTS,
    ConfigError,
    load_config,
    run_experiment,
    write_outputs,
)
from .hamiltonian import ResourceLimitError
from .vqe import EnsembleFailedError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RESOURCE = 3
EXIT_ALL_FAILED = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mblvqe",
        description="Run excited-state VQE experiments on the quasiperiodic chain.",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} pipeline")
        p.add_argument("--config", metavar="PATH", default=None,
                       help="INI config file; flags override its values")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", metavar="DIR", default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument(
            "--override",
            metavar="SECTION.KEY=VALUE",
            action="append",
            default=[],
            help="override one config value; repeatable",
        )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(
            args.experiment,
            config_path=args.config,
            overrides=tuple(args.override),
            seed=args.seed,
            out_dir=args.out,
            workers=args.workers,
        )
        record = run_experiment(cfg)
        paths = write_outputs(record, cfg.out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceLimitError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except EnsembleFailedError as exc:
        print(f"ensemble failed: {exc}", file=sys.stderr)
        return EXIT_ALL_FAILED

    print(f"{record.experiment}: {len(record.rows)} rows in {record.wall_time_s:.1f}s")
    print(f"csv:  {paths['csv']}")
    print(f"json: {paths['json']}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
