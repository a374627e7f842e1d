"""Command line entry point: run, validate, figures, pcd, wigner."""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__, states
from .export import FORMATS, export, write_wigner_csv
from .scenario import (ScenarioError, bundled_names, bundled_scenario,
                       load_scenario, run, run_point, with_grid)
from .states import TruncationError

EXIT_OK, EXIT_INVALID, EXIT_TRUNCATION, EXIT_IO = 0, 2, 3, 4


def _grid(text: str):
    try:
        t_max, points = text.split(":")
        t_max, points = float(t_max), int(points)
    except ValueError:
        raise argparse.ArgumentTypeError("expected TMAX:POINTS, e.g. 25:400") from None
    if t_max <= 0 or points < 2:
        raise argparse.ArgumentTypeError("need TMAX > 0 and POINTS >= 2")
    return t_max, points


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _run_flags(p):
    p.add_argument("--out", default=".", help="output directory (default: current)")
    p.add_argument("--format", choices=FORMATS, default="csv")
    p.add_argument("--threads", type=_positive_int, default=None,
                   help="worker count (default: $DJCM_THREADS or 1)")
    p.add_argument("--nmax", type=_positive_int, default=None, help="fixed Fock cutoff")
    p.add_argument("--grid", type=_grid, default=None, metavar="TMAX:POINTS")


def _field_flags(p):
    p.add_argument("--nbar-c", type=float, default=0.0)
    p.add_argument("--nbar-s", type=float, default=0.0)
    p.add_argument("--nbar-th", type=float, default=0.0)
    p.add_argument("--phi", type=float, default=0.0)
    p.add_argument("--alpha-phase", type=float, default=0.0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="djcm", description="Double JC entanglement dynamics.")
    ap.add_argument("--version", action="version", version=f"djcm {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario file")
    p.add_argument("scenario")
    _run_flags(p)

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("scenario")

    p = sub.add_parser("figures", help="run a bundled figure scenario")
    p.add_argument("id", nargs="?", help="figure id, e.g. 1, 05 or fig05")
    p.add_argument("--list", action="store_true", help="list bundled scenarios")
    _run_flags(p)

    p = sub.add_parser("pcd", help="photon-counting distribution of an SCTS")
    _field_flags(p)
    p.add_argument("--lmax", type=int, default=None, help="largest photon number (default: adaptive)")

    p = sub.add_parser("wigner", help="Wigner grid of one cavity field at a given time")
    p.add_argument("scenario", help="scenario file or bundled id (fig03)")
    p.add_argument("--time", type=float, required=True, help="lambda t of the snapshot")
    p.add_argument("--field", choices=("a", "b"), default="a")
    p.add_argument("--range", type=float, default=5.0, help="half-width of the square grid")
    p.add_argument("--points", type=_positive_int, default=201)
    p.add_argument("--nmax", type=_positive_int, default=None)
    p.add_argument("--out", default=None, help="CSV path (default: stdout)")
    return ap


def _load(ref: str):
    if os.path.exists(ref):
        return load_scenario(ref)
    if ref.lower().startswith("fig"):
        return bundled_scenario(ref)
    raise FileNotFoundError(ref)


def _apply_flags(scn, args):
    if args.grid:
        scn = with_grid(scn, *args.grid)
    return scn


def _summary(res) -> str:
    lines = [f"{res.scenario.name}: {len(res.points)} sweep point(s), "
             f"{res.provenance['wall_time_s']:.1f} s"]
    for pr in res.points:
        label = ", ".join(f"{k}={v:g}" for k, v in pr.params.items()) or "-"
        esd = pr.esd.get("C_AB")
        extra = f", C_AB ESD intervals {len(esd)}" if esd is not None else ""
        lines.append(f"  [{label}] N_max={pr.n_max} route={pr.route}{extra}")
    return "\n".join(lines)


def _execute(scn, args):
    res = run(scn, threads=args.threads, n_max=args.nmax)
    for path in export(res, args.format, args.out):
        print(f"wrote {path}")
    print(_summary(res))


def _cmd_pcd(args):
    p = states.SctsParams.from_photon_numbers(args.nbar_c, args.nbar_s, args.nbar_th, args.phi,
                                              args.alpha_phase)
    n = states.adaptive_n_max(p) if args.lmax is None else args.lmax + 1
    closed = states.pcd_table(n - 1, p)
    numeric = states.pcd_numeric(states.scts_density(p, n, tail_tol=None))
    print("l,closed_form,numeric")
    for l in range(n):
        print(f"{l},{closed[l]:.17g},{numeric[l]:.17g}")
    print(f"# sum closed_form = {closed.sum():.17g}", file=sys.stderr)


def _cmd_wigner(args):
    scn = _load(args.scenario)
    out = replace(scn.outputs, wigner=True, wigner_times=(args.time,), wigner_field=args.field,
                  wigner_range=args.range, wigner_points=args.points, esd=False)
    scn = replace(scn, outputs=out)
    point = scn.sweep_points()[0]
    pr = run_point(scn, point, n_max=args.nmax, times=np.array([args.time]))
    t, grid = pr.wigner[0]
    if args.out:
        write_wigner_csv(grid, args.out)
        print(f"wrote {args.out} (t={t:g}, integral {grid.integral():.6f})")
    else:
        write_wigner_csv(grid, sys.stdout)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            scn = load_scenario(args.scenario)
            n = len(scn.sweep_points())
            print(f"{scn.name}: ok ({scn.model.model}, {n} sweep point(s), "
                  f"{scn.grid.points} times to {scn.grid.t_max:g})")
        elif args.command == "run":
            _execute(_apply_flags(load_scenario(args.scenario), args), args)
        elif args.command == "figures":
            if args.list or not args.id:
                print("\n".join(bundled_names()))
                return EXIT_OK
            _execute(_apply_flags(bundled_scenario(args.id), args), args)
        elif args.command == "pcd":
            _cmd_pcd(args)
        elif args.command == "wigner":
            _cmd_wigner(args)
    except TruncationError as exc:
        print(f"truncation error: {exc}", file=sys.stderr)
        return EXIT_TRUNCATION
    except (ScenarioError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
