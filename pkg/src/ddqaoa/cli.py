"""Command-line entry point: ``ddqaoa run|report|inspect``."""

from __future__ import annotations

import argparse
import logging
import sys

from .sweep import ConfigError, inspect_runs, load_config, report, run_sweep


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="ddqaoa", description="DD-on-QAOA sweep runner")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run the grid described by a JSON config")
    p_run.add_argument("config")
    p_run.add_argument("-o", "--output-dir", help="override the config's output_dir")
    p_run.add_argument("--workers", type=int, help="override the config's worker count")
    p_run.add_argument("--no-report", action="store_true", help="skip summary.csv and figures")
    p_rep = sub.add_parser("report", help="rebuild tables and figures from a result directory")
    p_rep.add_argument("result_dir")
    p_rep.add_argument("--no-figures", action="store_true")
    p_ins = sub.add_parser("inspect", help="print one line per record of a runs.jsonl file")
    p_ins.add_argument("jsonl")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    try:
        if args.command == "run":
            cfg = load_config(args.config)
            if args.workers is not None:
                from dataclasses import replace
                cfg = replace(cfg, workers=args.workers)
            outcome = run_sweep(cfg, args.output_dir)
            print(f"{outcome.n_records} runs from {outcome.n_cells} cells -> {outcome.output_dir}")
            for key, err in outcome.failures:
                print(f"FAILED {key}: {err}", file=sys.stderr)
            if outcome.n_records and not args.no_report:
                print(f"summary -> {report(outcome.output_dir)}")
            return 0 if outcome.ok else 1
        if args.command == "report":
            print(f"summary -> {report(args.result_dir, figures=not args.no_figures)}")
            return 0
        print(inspect_runs(args.jsonl))
        return 0
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
