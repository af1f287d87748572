"""Command line: ``python3 -m lognls run <config> | list | describe <scenario>``.

Exit codes: 0 when the run passes, 1 when it fails (including guard violations),
2 for configuration errors.
"""
from __future__ import annotations

import argparse
import os
import sys

from .experiments import REGISTRY, ConfigError, parse_config, run_scenario, write_plot


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lognls", description="Reproducible experiments for the controlled log-NLS.")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario from a config file")
    run.add_argument("config")
    run.add_argument("--seed", type=int)
    run.add_argument("--out", help="CSV path (default: config value or <scenario>.csv)")
    run.add_argument("--threads", type=int)
    run.add_argument("--plot", action="store_true", help="also write a gnuplot .dat/.gp pair")
    run.add_argument("--timing", action="store_true", help="fill the wall_ms column")
    sub.add_parser("list", help="list registered scenarios")
    desc = sub.add_parser("describe", help="show a scenario and its default parameters")
    desc.add_argument("scenario")
    return p


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    if args.command == "list":
        for name, sc in REGISTRY.items():
            print(f"{name:22s} {sc.description}")
        return 0
    if args.command == "describe":
        sc = REGISTRY.get(args.scenario)
        if sc is None:
            print(f"unknown scenario {args.scenario!r}", file=sys.stderr)
            return 2
        print(f"{sc.name}: {sc.description}")
        for k, v in sc.defaults.items():
            if isinstance(v, list):
                v = ", ".join(map(str, v))
            print(f"  {k} = {v}")
        return 0

    try:
        with open(args.config) as fh:
            text = fh.read()
        overrides = {"seed": args.seed, "threads": args.threads, "out": args.out}
        if args.timing:
            overrides["timing"] = True
        cfg = parse_config(text, overrides)
    except (OSError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if cfg.out is None:
        cfg.out = f"{cfg.name}.csv"
    result = run_scenario(cfg)
    print(result.report.line())
    print(f"wrote {cfg.out}")
    if args.plot:
        data, script = write_plot(result, os.path.splitext(cfg.out)[0])
        print(f"wrote {data}, {script}")
    return 0 if result.report.passed else 1
