"""Command-line entry point.

    swvortex <command> [--config PATH] [--out DIR] [--grid N] [--seed S]

Commands: generate, solve, refine, verify, vekua, energy run a pipeline
stage; ``report`` prints a summary of ``DIR/report.json``. Exit status is
0 on success, 2 for configuration errors, 3 for solver failures and 4 when
``verify`` finds residuals above the threshold.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import RunConfig, parse_config
from .errors import ConfigurationError
from .pipeline import COMMANDS, EXIT_CONFIG, EXIT_OK, run_pipeline


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="swvortex", description="Vortex-equation numerical experiments.")
    p.add_argument("command", choices=COMMANDS + ("report",))
    p.add_argument("--config", type=Path, help="configuration file")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: out)")
    p.add_argument("--grid", type=int, help="override [grid] n")
    p.add_argument("--seed", type=int, help="override [run] seed")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _summary(report: dict) -> str:
    lines = [f"{report['command']}: {report['status']} (exit {report['exit_code']})"]
    if report.get("error"):
        err = report["error"]
        lines.append(f"  failed in stage '{err['stage']}': {err['message']}")
    for key, val in sorted((report.get("results") or {}).items()):
        if isinstance(val, (int, float, str, bool)) or val is None:
            lines.append(f"  {key} = {val}")
    if report.get("artifacts"):
        lines.append(f"  artifacts: {', '.join(report['artifacts'])}")
    return "\n".join(lines)


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "report":
        path = args.out / "report.json"
        try:
            report = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read {path}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(_summary(report))
        return EXIT_OK
    try:
        cfg = parse_config(args.config.read_text()) if args.config else RunConfig()
        cfg = cfg.with_overrides(grid_n=args.grid, seed=args.seed)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    outcome = run_pipeline(cfg, args.command, args.out)
    print(_summary(outcome.report))
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
