"""Command line interface: ``lcepi {functionals,verify,flow,report}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import load_config
from .errors import ConfigError, ResolutionError
from .runner import (
    ExitCode,
    dumps,
    run_all,
    run_flow,
    run_functionals,
    run_verify,
    write_csv,
    write_json,
)

log = logging.getLogger("lcepi")

_COMMANDS = {
    "functionals": run_functionals,
    "verify": run_verify,
    "flow": run_flow,
    "report": run_all,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lcepi",
        description="Entropy, Fisher information and EPI checks on log-concave densities.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("functionals", "entropy, Fisher information and J per density"),
        ("verify", "inequality verdicts over density pairs and (a, b) sweeps"),
        ("flow", "Lambda(t) traces and strengthened EPI reports"),
        ("report", "all of the above"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, default=None,
                       help="experiment JSON (default: bundled experiment)")
        p.add_argument("--out", type=Path, default=None,
                       help="output directory (default: JSON to stdout)")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--spacing", type=float, default=None, help="grid spacing override")
        p.add_argument("--seed", type=int, default=None,
                       help="seed for randomized spot-check points")
        p.add_argument("--workers", type=int, default=1, help="worker threads")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config).with_overrides(args.spacing, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return int(ExitCode.CONFIG)
    try:
        rep = _COMMANDS[args.command](cfg, args.workers)
    except ResolutionError as exc:
        print(f"resolution error: {exc}", file=sys.stderr)
        return int(ExitCode.RESOLUTION)
    out = args.out if args.out is not None else (Path(cfg.out_dir) if cfg.out_dir else None)
    if out is None:
        if args.format == "csv":
            print("--format csv requires --out", file=sys.stderr)
            return int(ExitCode.CONFIG)
        sys.stdout.write(dumps(rep))
    else:
        writer = write_csv if args.format == "csv" else write_json
        for path in writer(rep, out, args.command):
            log.info("wrote %s", path)
    sys.stderr.write(rep.summary())
    return int(rep.exit_code)


if __name__ == "__main__":
    sys.exit(main())
