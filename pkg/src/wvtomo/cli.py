"""Command-line entry point.

Subcommands mirror the experiment pipelines (fig1..fig5), plus a generic
sweep, a pure reconstruction helper, and a selftest. Exit codes: 0 success,
1 configuration/usage error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import harness
from .errors import ConfigError, WvtomoError
from .harness import parse_angle
from .states import BlochAngles, density_from_pure, pure_from_angles
from .tomography import WeakValue, reconstruct

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _build_parser() -> _Parser:
    parser = _Parser(prog="wvtomo", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, sweep_opts=True):
        p.add_argument("--config", type=Path, help="JSON config file")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--seed", type=int, help="master seed (overrides config)")
        p.add_argument("--n-traj", type=int, help="trajectories per ensemble")
        p.add_argument("--threads", type=int, help="worker processes (or WVTOMO_THREADS)")
        if sweep_opts:
            p.add_argument("--mode", choices=harness.MODES, help="factor/physics mode")
            p.add_argument("--pps", choices=harness.PPS_MODES, help="post-selection estimator")

    for name, blurb in (
        ("fig1", "weak vs finite strength, linear vs iterative extraction"),
        ("fig2", "efficiency comparison eta=1.0 vs 0.8"),
        ("fig3", "alias of fig2 (fidelity view is rendered downstream)"),
        ("fig4", "single-angle tomogram at both efficiencies"),
        ("fig5", "beyond bad-cavity: proper vs improper factors"),
    ):
        p = sub.add_parser(name, help=blurb)
        add_common(p)
        if name == "fig4":
            p.add_argument("--theta-f", default="0.65pi", help="post-selection polar angle")

    p = sub.add_parser("sweep", help="generic sweep with the configured mode/efficiency")
    add_common(p)
    p.add_argument("--theta-f", help="single post-selection angle (otherwise config sweep)")
    p.add_argument("--eta", type=float, help="detector efficiency")

    p = sub.add_parser("reconstruct", help="invert a weak value into a state")
    p.add_argument("--re-wv", type=float, required=True)
    p.add_argument("--im-wv", type=float, required=True)
    p.add_argument("--theta-f", required=True, help="post-selection polar angle")
    p.add_argument("--phi-f", default=0.0, help="post-selection azimuth")
    p.add_argument("--phi1", type=float, default=0.0, help="accumulated Stark phase")

    p = sub.add_parser("selftest", help="run the built-in example checks")
    p.add_argument("--fast", action="store_true", help="skip the Monte Carlo checks")
    return parser


def _load_config(args) -> harness.ExperimentConfig:
    config = harness.load_config(args.config) if args.config else harness.default_config()
    if getattr(args, "seed", None) is not None:
        config = replace(config, master_seed=args.seed)
    if getattr(args, "n_traj", None) is not None:
        config = replace(config, n_trajectories=args.n_traj)
    threads = getattr(args, "threads", None)
    if threads is None and os.environ.get("WVTOMO_THREADS"):
        try:
            threads = int(os.environ["WVTOMO_THREADS"])
        except ValueError:
            raise ConfigError(
                f"WVTOMO_THREADS must be an integer, got {os.environ['WVTOMO_THREADS']!r}"
            )
    if threads is not None:
        config = replace(config, threads=threads)
    if getattr(args, "mode", None):
        config = replace(config, mode=args.mode)
    if getattr(args, "pps", None):
        config = replace(config, pps_mode=args.pps)
    if getattr(args, "eta", None) is not None:
        config = replace(config, eta=args.eta)
    return config


def _cmd_reconstruct(args) -> int:
    psi_f = pure_from_angles(
        BlochAngles(parse_angle(args.theta_f), parse_angle(args.phi_f) % (2 * math.pi))
    )
    psi = reconstruct(WeakValue(complex(args.re_wv, args.im_wv)), psi_f, args.phi1)
    rho = density_from_pure(psi)
    print(json.dumps({
        "c1": [psi.c1.real, psi.c1.imag],
        "c2": [psi.c2.real, psi.c2.imag],
        "rho11": rho.rho11,
        "rho12": [rho.rho12.real, rho.rho12.imag],
    }, indent=2))
    return EXIT_OK


def _cmd_selftest(fast: bool) -> int:
    from .selftest import run_selftest

    return EXIT_OK if run_selftest(fast=fast) else EXIT_NUMERICAL


def cli_entry(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "reconstruct":
            return _cmd_reconstruct(args)
        if args.command == "selftest":
            return _cmd_selftest(args.fast)
        config = _load_config(args)
        if args.command == "fig1":
            outputs = harness.run_fig1(config, args.out)
        elif args.command in ("fig2", "fig3"):
            outputs = harness.run_fig2_fig3(config, args.out)
        elif args.command == "fig4":
            outputs = harness.run_fig4(config, args.out, parse_angle(args.theta_f))
        elif args.command == "fig5":
            outputs = harness.run_fig5(config, args.out)
        elif args.command == "sweep":
            theta_fs = [parse_angle(args.theta_f)] if args.theta_f else None
            outputs = harness.run_sweep(config, args.out, theta_fs)
        else:  # pragma: no cover - argparse enforces the choices
            raise ConfigError(f"unknown command {args.command}")
        for path in outputs:
            print(path)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except WvtomoError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def main() -> None:
    raise SystemExit(cli_entry())


if __name__ == "__main__":
    main()
