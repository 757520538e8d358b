"""Command-line front end.

Subcommands: ``run`` (single experiment), ``compare`` (per-epoch
algorithm comparison), ``verify`` (acceptance suite), ``spectral`` (print
the spectral profile and theory bundle for a configured network).
"""

from __future__ import annotations

import argparse
import sys

from . import harness, theory
from .acceptance import CRITERIA, run_criteria
from .errors import ConfigError, SabsimError


def _add_config_args(sub: argparse.ArgumentParser, need_out: bool) -> None:
    sub.add_argument("--config", required=True, help="path to a key-value config file")
    if need_out:
        sub.add_argument("--out", required=True, help="output directory for artifacts")
    sub.add_argument("--seed", type=int, default=None, help="override run.seed from the config")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sabsim",
        description="Distributed stochastic gradient tracking: simulation and verification",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    _add_config_args(subs.add_parser("run", help="run the configured experiment"), need_out=True)
    _add_config_args(subs.add_parser("compare", help="compare algorithms per epoch"), need_out=True)
    _add_config_args(
        subs.add_parser("spectral", help="print spectral profile and theory bundle"), need_out=False
    )
    verify = subs.add_parser("verify", help="run the acceptance suite")
    verify.add_argument(
        "--criteria",
        default=None,
        help=f"comma-separated criterion numbers (1..{len(CRITERIA)}); default all",
    )
    return parser


def _load(args) -> harness.ExperimentConfig:
    return harness.load_experiment(args.config, seed_override=args.seed)


def _cmd_spectral(cfg: harness.ExperimentConfig) -> int:
    mu, ell, sigma_sq = cfg.oracle.effective_constants()
    bundle = theory.theory_bundle(cfg.profile, mu, ell, sigma_sq, cfg.alpha)
    for key, value in harness._summary_lines(cfg, bundle):
        print(f"{key} = {harness._fmt(value)}")
    return harness.EXIT_OK


def _cmd_verify(args) -> int:
    if args.criteria:
        try:
            indices = [int(s) for s in args.criteria.split(",")]
        except ValueError:
            print(f"invalid --criteria value: {args.criteria!r}")
            return harness.EXIT_CONFIG
        known = {idx for idx, _, _ in CRITERIA}
        bad = [i for i in indices if i not in known]
        if bad:
            print(f"unknown criteria: {bad}")
            return harness.EXIT_CONFIG
    else:
        indices = None
    results = run_criteria(indices)
    return harness.EXIT_OK if all(r.passed for r in results) else harness.EXIT_INVARIANT


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            return _cmd_verify(args)
        cfg = _load(args)
        if args.command == "run":
            return harness.run_experiment(cfg, args.out)
        if args.command == "compare":
            return harness.compare_algorithms(cfg, args.out)
        return _cmd_spectral(cfg)
    except ConfigError as exc:
        print(f"invalid config: {exc}")
        return harness.EXIT_CONFIG
    except SabsimError as exc:
        print(f"error: {exc}")
        return harness.EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
