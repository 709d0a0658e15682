"""Command line entry point: ``wide run | check | suite``."""
from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import ConfigError, load_config
from .runner import ScenarioError, emit_outputs, run_scenario

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_CONFIG = 2
EXIT_BREAKDOWN = 3

log = logging.getLogger("wide")


def _out_dir(cfg, out: str | None, config_path: Path, nested: bool) -> Path:
    if out is not None:
        return Path(out) / cfg.name if nested else Path(out)
    if cfg.out_dir:
        path = Path(cfg.out_dir)
        return path if path.is_absolute() else config_path.parent / path
    return Path("out") / cfg.name


def _run_one(config_path: str, out: str | None, nested: bool, figures: bool) -> dict:
    """Run a single config; returns a row for the summary table."""
    path = Path(config_path)
    row = {"config": str(path), "scenario": path.stem, "status": "", "code": EXIT_OK, "detail": ""}
    try:
        cfg = load_config(path)
    except ConfigError as exc:
        row.update(status="config-error", code=EXIT_CONFIG, detail=f"{path}: {exc}")
        return row
    row["scenario"] = cfg.name
    try:
        report = run_scenario(cfg)
    except ScenarioError as exc:
        row.update(status="breakdown", code=EXIT_BREAKDOWN, detail=str(exc))
        return row
    except ConfigError as exc:
        row.update(status="config-error", code=EXIT_CONFIG, detail=f"{path}: {exc}")
        return row
    out_dir = _out_dir(cfg, out, path, nested)
    emit_outputs(report, out_dir, figures=figures and cfg.figures)
    failed = [v.name for v in report.limit.verdicts if not v.passed]
    row["out"] = str(out_dir)
    if failed:
        row.update(status="FAIL", code=EXIT_VERDICT, detail=", ".join(failed))
    else:
        row["status"] = "pass"
    return row


def _run_many(paths, out, nested, jobs, figures) -> list[dict]:
    if jobs <= 1 or len(paths) <= 1:
        return [_run_one(p, out, nested, figures) for p in paths]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(_run_one, p, out, nested, figures) for p in paths]
        return [f.result() for f in futures]


def _print_table(rows: list[dict]) -> None:
    width = max([len(r["scenario"]) for r in rows] + [8])
    print(f"{'scenario':<{width}}  {'status':<12}  detail")
    for r in rows:
        print(f"{r['scenario']:<{width}}  {r['status']:<12}  {r['detail']}")


def _exit_code(rows: list[dict]) -> int:
    return max((r["code"] for r in rows), default=EXIT_OK)


def cmd_run(args) -> int:
    rows = _run_many(args.configs, args.out, len(args.configs) > 1, args.jobs, not args.no_figures)
    for r in rows:
        if r["code"] in (EXIT_CONFIG, EXIT_BREAKDOWN):
            print(r["detail"], file=sys.stderr)
    _print_table(rows)
    return _exit_code(rows)


def cmd_check(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{args.config}: ok (scenario {cfg.name}, {len(cfg.terms)} term(s), "
          f"{len(cfg.epsilons)} eps value(s))")
    return EXIT_OK


def cmd_suite(args) -> int:
    directory = Path(args.directory)
    if not directory.is_dir():
        print(f"{directory}: not a directory", file=sys.stderr)
        return EXIT_CONFIG
    paths = sorted(str(p) for p in directory.glob("*.cfg"))
    if not paths:
        print(f"{directory}: no *.cfg files", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out if args.out is not None else "out"
    rows = _run_many(paths, out, True, args.jobs, not args.no_figures)
    _print_table(rows)
    return _exit_code(rows)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wide", description="Weighted inertia-energy-dissipation runs.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one or more scenario configs")
    p.add_argument("configs", nargs="+", metavar="config")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="scenarios to run in parallel")
    p.add_argument("--no-figures", action="store_true", help="skip the PNG figures")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("check", help="parse and validate a config")
    p.add_argument("config")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("suite", help="run every *.cfg in a directory")
    p.add_argument("directory")
    p.add_argument("--out", default=None, help="root output directory (default ./out)")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_suite)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be >= 1")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
