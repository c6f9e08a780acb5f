"""Command line entry point: ``catiter {run,sweep,verify,estimate-k} CONFIG``.

Exit status 0 means every enabled check passed, 1 means a diagnostic
failed (the failing checks are named on stderr) and 2 means the
configuration or the command line could not be used.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from typing import Optional, Sequence

from . import config as cfgmod
from .errors import ConfigError
from .harness import OUT_DIR_ENV, resolve_out_dir, run_estimate_k, run_experiment, run_sweep, verify_geometry

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="catiter", description="Ishikawa iteration experiments on CAT(K) model spaces.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "run": "run one experiment and its diagnostics",
        "sweep": "run the cartesian product of the [sweep] axes",
        "verify": "sample the comparison, contraction and convexity-defect suites",
        "estimate-k": "estimate the convexity-defect constant on a ball",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, help=text, description=text)
        sp.add_argument("config", help="TOML configuration file")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--out-dir", help=f"output directory (default: config, then ${OUT_DIR_ENV}, then ./out)")
        if name in ("run", "sweep"):
            sp.add_argument("--tol", type=float, help="override stop.tol")
            sp.add_argument("--max-iters", type=int, help="override stop.max_iters")
        sp.add_argument("-q", "--quiet", action="store_true", help="only print failures")
    return p


def _dispatch(args):
    if args.command == "run":
        cfg = cfgmod.load(args.config, "run").with_overrides(args.seed, args.tol, args.max_iters)
        return run_experiment(cfg, resolve_out_dir(args.out_dir, cfg.out_dir))
    if args.command == "sweep":
        sw = cfgmod.load(args.config, "sweep")
        sw = replace(sw, base=sw.base.with_overrides(args.seed, args.tol, args.max_iters))
        return run_sweep(sw, resolve_out_dir(args.out_dir, sw.base.out_dir))
    if args.command == "verify":
        vc = cfgmod.load(args.config, "verify")
        if args.seed is not None:
            vc = replace(vc, seed=args.seed)
        return verify_geometry(vc, resolve_out_dir(args.out_dir, vc.out_dir))
    ec = cfgmod.load(args.config, "estimate-k")
    if args.seed is not None:
        ec = replace(ec, seed=args.seed)
    return run_estimate_k(ec, resolve_out_dir(args.out_dir, ec.out_dir))


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        outcome = _dispatch(args)
    except ConfigError as exc:
        print(f"catiter: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not args.quiet:
        for kind, path in outcome.paths.items():
            print(f"{kind}: {path}")
        if "k_estimate" in outcome.report and outcome.report["k_estimate"] is not None:
            print(f"k_estimate: {outcome.report['k_estimate']!r}")
    if outcome.status != EXIT_OK:
        print(f"catiter: FAILED: {', '.join(outcome.failed)}", file=sys.stderr)
        return EXIT_FAIL
    if not args.quiet:
        print("status: pass")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
