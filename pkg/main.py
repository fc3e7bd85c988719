"""
difftrio command-line entry point: run / sweep / synth-bc / oracle
"""
import argparse
import json
import logging
import sys
from typing import List, Optional

from bc_data import synth_annual_bc, write_bc_csv
from bench import certify, load_config, run_case, sweep_resistances
from errors import ConfigurationError, DifftrioError
from settings import setup_logging

logger = logging.getLogger("difftrio")

# 終了コード
EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2


def _parse_r_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigurationError(f"--r expects comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="difftrio",
        description="Accuracy and cost benchmark of RC, finite-difference and spectral diffusion solvers",
    )
    parser.add_argument("--log-level", default=None, help="override DIFFTRIO_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run every solver of a case and write the report")
    run.add_argument("config")
    run.add_argument("--jobs", type=int, default=None)

    sweep = sub.add_parser("sweep", help="error versus number of RC resistances")
    sweep.add_argument("config")
    sweep.add_argument("--r", dest="r_values", default=None, help="comma-separated r values, e.g. 2,5,10")
    sweep.add_argument("--jobs", type=int, default=None)

    synth = sub.add_parser("synth-bc", help="write a synthetic hourly year of surface temperatures")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--out", required=True)
    synth.add_argument("--hours", type=int, default=8760)

    oracle = sub.add_parser("oracle", help="certify the reference solution of a case")
    oracle.add_argument("config")
    return parser


def dispatch(args: argparse.Namespace) -> int:
    if args.command == "synth-bc":
        write_bc_csv(synth_annual_bc(args.seed, args.hours), args.out)
        return EXIT_OK

    config = load_config(args.config)
    if args.command == "run":
        result = run_case(config, args.jobs)
        for row in result.rows:
            print(f"{row['solver']:>10}  {row['status']}")
        return EXIT_PARTIAL if result.n_failed else EXIT_OK
    if args.command == "sweep":
        r_values = _parse_r_list(args.r_values) if args.r_values else None
        result = sweep_resistances(config, r_values, args.jobs)
        for row in result.rows:
            print(f"{row.r:>5}  {row.field_eps_inf:.3e}  {row.flux_eps_inf:.3e}  {row.status}")
        print(f"field < {result.field_threshold:g} from r={result.field_r_min}, "
              f"flux < {result.flux_threshold:g} from r={result.flux_r_min}")
        return EXIT_PARTIAL if any(row.status != "ok" for row in result.rows) else EXIT_OK
    certificate = certify(config)
    print(json.dumps(certificate.model_dump(), indent=2, sort_keys=True))
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        setup_logging(args.log_level)
        return dispatch(args)
    except DifftrioError as e:
        logger.error("[%s] %s", type(e).__name__, e.detail)
        print(f"error: {e.detail}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
