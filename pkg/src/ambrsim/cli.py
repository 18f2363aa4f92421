"""Command line entry point: ``ambrsim run | analytic | validate-config``."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .config import ConfigError, SimConfig, explicit_overrides, load_config
from .harness import PRESETS, SweepAborted, analytic_sweep, emit_analytic_csv, emit_csv, run_scenario


def _parse_range(token):
    """``name=v1,v2,...`` or ``name=start:stop:step`` (stop inclusive)."""
    if "=" not in token:
        raise argparse.ArgumentTypeError(f"expected name=values, got {token!r}")
    name, text = token.split("=", 1)
    try:
        if ":" in text:
            start, stop, step = (float(x) for x in text.split(":"))
            if step <= 0:
                raise ValueError("step must be > 0")
            count = int(np.floor((stop - start) / step + 1e-9)) + 1
            values = [start + i * step for i in range(max(count, 0))]
        else:
            values = [float(x) for x in text.split(",") if x]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad range {token!r}: {exc}") from None
    return name, values


def _out(path):
    return sys.stdout.buffer if path in (None, "-") else path


def cmd_run(args):
    try:
        if args.preset:
            over = explicit_overrides(args.config, args.set)
            res = run_scenario(args.preset, args.replications, args.base_seed, args.jobs, over)
        else:
            cfg = load_config(args.config, args.set)
            res = run_scenario(cfg, args.replications, args.base_seed, args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SweepAborted as exc:
        print(f"sweep aborted: {exc}", file=sys.stderr)
        return 3
    emit_csv(res, _out(args.out))
    return 0


def cmd_analytic(args):
    ranges = dict(args.ranges)
    try:
        rows = analytic_sweep(ranges)
    except ValueError as exc:
        print(f"invalid ranges: {exc}", file=sys.stderr)
        return 2
    emit_analytic_csv(rows, _out(args.out))
    return 0


def cmd_validate(args):
    try:
        cfg = load_config(args.config, args.set)
    except (ConfigError, OSError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return 2
    defaults = SimConfig()
    changed = {k: v for k, v in vars(cfg).items() if getattr(defaults, k) != v}
    print("ok" + ("" if not changed else " " + " ".join(f"{k}={v}" for k, v in changed.items())))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="ambrsim", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a preset sweep or a single configuration")
    run.add_argument("--preset", choices=sorted(PRESETS))
    run.add_argument("--config", help="key=value config file")
    run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                     help="override a config key (repeatable)")
    run.add_argument("--replications", type=int, default=None)
    run.add_argument("--base-seed", type=int, default=1)
    run.add_argument("--jobs", type=int, default=1, help="worker processes")
    run.add_argument("--out", default="-", help="CSV destination (default stdout)")
    run.set_defaults(func=cmd_run)

    an = sub.add_parser("analytic", help="sweep the closed-form model")
    an.add_argument("ranges", nargs="*", type=_parse_range, metavar="NAME=VALUES",
                    help="e.g. e_n=1:5:1 pb=0.5 (names: lam mu e_l e_n kk p0 k pb)")
    an.add_argument("--out", default="-")
    an.set_defaults(func=cmd_analytic)

    val = sub.add_parser("validate-config", help="check a config file")
    val.add_argument("config", nargs="?")
    val.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    val.set_defaults(func=cmd_validate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
