"""Command-line entry point (``nanopnp``)."""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import gfuncs, harness, scenarios
from .errors import NanoPNPError
from .radial import RadialProblem, solve_psi, solve_psi_refined

logger = logging.getLogger(__name__)


def _gfuncs_dump(args):
    lam = np.logspace(np.log10(args.lambda_min), np.log10(args.lambda_max), args.points)
    beta = np.full_like(lam, args.beta)
    g1s, g2s = gfuncs.g_pair(lam, beta)
    rows = []
    for k in range(lam.size):
        oracle = solve_psi_refined(lam[k], args.beta, tol=args.oracle_tol).g1 if args.oracle else float("nan")
        rows.append((lam[k], gfuncs.g1_large(lam[k], args.beta), gfuncs.g1_small(lam[k], args.beta),
                     g1s[k], oracle, g2s[k]))
    header = ["lambda", "g1_large", "g1_small", "g1_smooth", "g1_oracle", "g2"]
    if args.out:
        harness.write_csv(args.out, header, rows)
    else:
        import csv

        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        w.writerows([[harness._cell(float(v)) for v in r] for r in rows])
    return 0


def _radial_dump(args):
    prof = solve_psi(RadialProblem(args.lam, args.beta, args.points))
    prof.to_csv(args.out)
    return 0


def _scenario_dump(args):
    text = scenarios.to_toml(scenarios.builtin(args.name))
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _module_solve(solver):
    def handler(args):
        spec = harness.RunSpec(
            scenario=args.scenario, solver=solver, voltages=(args.voltage,), out=args.out,
            fields=getattr(args, "fields", False), g_oracle=getattr(args, "g_oracle", False),
            nx=getattr(args, "nx", None), nr=getattr(args, "nr", None), iv_filename="iv.csv",
        )
        return harness.run(spec)
    return handler


def _module_sweep(solver):
    def handler(args):
        if args.steps < 1:
            raise NanoPNPError("--steps must be at least 1")
        spec = harness.RunSpec(
            scenario=args.scenario, solver=solver,
            voltages=tuple(np.linspace(args.v_min, args.v_max, args.steps)), out=args.out,
            g_oracle=getattr(args, "g_oracle", False), iv_filename="iv.csv",
        )
        return harness.run(spec)
    return handler


def _run(args):
    voltages = harness.parse_sweep(args.sweep) if args.sweep else (args.voltage,)
    spec = harness.RunSpec(scenario=args.scenario, solver=args.solver, voltages=tuple(voltages),
                           out=args.out, fields=args.fields, g_oracle=args.g_oracle,
                           nx=args.nx, nr=args.nr)
    return harness.run(spec)


def _rerun(args):
    return harness.rerun(args.manifest, args.out)


def build_parser():
    parser = argparse.ArgumentParser(prog="nanopnp", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gfuncs", help="closed-form and numerical G-integrals")
    gsub = g.add_subparsers(dest="action", required=True)
    d = gsub.add_parser("dump", help="CSV of g1 approximations over a lambda range")
    d.add_argument("--beta", type=float, required=True)
    d.add_argument("--lambda-min", type=float, default=0.01)
    d.add_argument("--lambda-max", type=float, default=3.0)
    d.add_argument("--points", type=int, default=50)
    d.add_argument("--no-oracle", dest="oracle", action="store_false",
                   help="skip the numerical radial solves")
    d.add_argument("--oracle-tol", type=float, default=1e-8)
    d.add_argument("--out", help="output CSV (default: stdout)")
    d.set_defaults(func=_gfuncs_dump)

    r = sub.add_parser("radial", help="radial Poisson-Boltzmann profiles")
    rsub = r.add_subparsers(dest="action", required=True)
    d = rsub.add_parser("dump", help="CSV of xi, psi")
    d.add_argument("--lambda", dest="lam", type=float, required=True)
    d.add_argument("--beta", type=float, required=True)
    d.add_argument("--points", type=int, default=400)
    d.add_argument("--out", default="psi.csv")
    d.set_defaults(func=_radial_dump)

    for solver in ("quasi1d", "area1d", "pnp2d"):
        s = sub.add_parser(solver, help=f"{solver} solver")
        ssub = s.add_subparsers(dest="action", required=True)
        p = ssub.add_parser("solve", help="single voltage")
        p.add_argument("scenario", help="TOML file or built-in name")
        p.add_argument("--voltage", type=float, default=0.0)
        p.add_argument("--out", default=".")
        if solver == "quasi1d":
            p.add_argument("--g-oracle", action="store_true", help="numerical G-integrals per node")
            p.add_argument("--fields", action="store_true", help="also write fields.csv")
        if solver == "pnp2d":
            p.add_argument("--nx", type=int)
            p.add_argument("--nr", type=int)
        p.set_defaults(func=_module_solve(solver))
        if solver == "pnp2d":
            continue
        p = ssub.add_parser("sweep", help="IV curve")
        p.add_argument("scenario")
        p.add_argument("--v-min", type=float, required=True)
        p.add_argument("--v-max", type=float, required=True)
        p.add_argument("--steps", type=int, required=True)
        p.add_argument("--out", default=".")
        if solver == "quasi1d":
            p.add_argument("--g-oracle", action="store_true")
        p.set_defaults(func=_module_sweep(solver))

    p = sub.add_parser("run", help="one or all solvers with a comparison report")
    p.add_argument("scenario")
    p.add_argument("--solver", choices=harness.SOLVERS + ("all",), default="quasi1d")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--sweep", help="a:b:n voltage range")
    group.add_argument("--voltage", type=float, default=0.0)
    p.add_argument("--fields", action="store_true")
    p.add_argument("--g-oracle", action="store_true")
    p.add_argument("--nx", type=int)
    p.add_argument("--nr", type=int)
    p.add_argument("--out", default=".")
    p.set_defaults(func=_run)

    p = sub.add_parser("rerun", help="replay a run manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default=".")
    p.set_defaults(func=_rerun)

    p = sub.add_parser("scenario", help="scenario files")
    psub = p.add_subparsers(dest="action", required=True)
    d = psub.add_parser("dump", help="write a built-in scenario as TOML")
    d.add_argument("name", choices=sorted(scenarios.BUILTIN))
    d.add_argument("--out")
    d.set_defaults(func=_scenario_dump)
    return parser


def _join_negative_values(argv):
    """Attach the value of ``--sweep`` so ranges like ``-0.2:0.2:21`` are
    not mistaken for options."""
    out = []
    it = iter(argv)
    for arg in it:
        if arg == "--sweep":
            value = next(it, None)
            out.append(arg if value is None else f"--sweep={value}")
        else:
            out.append(arg)
    return out


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_join_negative_values(argv))
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NanoPNPError as exc:
        logger.error("%s", exc)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
