"""Command-line front end: fit a dataset, reproduce the simulation studies,
or dump basis values.

Exit codes: 0 success, 2 input/schema error, 3 computation failure.
"""
from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .basis import make_basis, raw_basis_matrix
from .data_io import load_dataset
from .exceptions import ComputationError, InputError, ParameterError
from .report import write_fit_report, write_study_report
from .simulate import ScenarioConfig, run_study
from .solver import SolverConfig, fit
from .tuning import TuningConfig

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_COMPUTE = 3

PRESETS = {
    "table1": "continuous",
    "table2": "continuous",
    "table3": "discrete",
    "table4": "discrete",
}

_SOLVER_KEYS = ("inner_tol", "outer_tol", "max_inner_iter", "max_outer_iter",
                "ridge_eps", "tau")


def _read_config_file(path: str) -> dict[str, str]:
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParameterError(f"{path}:{lineno}: expected key=value")
        key, _, val = line.partition("=")
        values[key.strip().replace("-", "_")] = val.strip()
    return values


def _merge_config(args: argparse.Namespace) -> None:
    """Fill unset flags from --config file entries (flags win)."""
    if not getattr(args, "config", None):
        return
    fileval = _read_config_file(args.config)
    for key, raw in fileval.items():
        if not hasattr(args, key):
            raise ParameterError(f"unknown config key {key!r}")
        if getattr(args, key) is None:
            default = _CASTS.get(key, str)
            setattr(args, key, default(raw))


_CASTS = {
    "n": int, "p": int, "q": int, "replicates": int, "seed": int,
    "knots": int, "order": int, "threads": int, "max_inner_iter": int,
    "max_outer_iter": int, "r": int,
    "noise_sd": float, "tau": float, "inner_tol": float, "outer_tol": float,
    "ridge_eps": float,
}


def _solver_config(args: argparse.Namespace) -> SolverConfig:
    overrides = {k: getattr(args, k) for k in _SOLVER_KEYS
                 if getattr(args, k, None) is not None}
    return SolverConfig(**overrides)


def _tuning_config(args: argparse.Namespace) -> TuningConfig:
    return TuningConfig(r=args.r) if getattr(args, "r", None) else TuningConfig()


def _add_solver_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--tau", type=float, help="MCP concavity (default 3)")
    sub.add_argument("--inner-tol", dest="inner_tol", type=float)
    sub.add_argument("--outer-tol", dest="outer_tol", type=float)
    sub.add_argument("--max-inner-iter", dest="max_inner_iter", type=int)
    sub.add_argument("--max-outer-iter", dest="max_outer_iter", type=int)
    sub.add_argument("--ridge-eps", dest="ridge_eps", type=float)
    sub.add_argument("--r", type=int, help="smoothness order for the knot range")
    sub.add_argument("--config", help="key=value overrides file (flags win)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vmicm",
        description="Varying multi-index coefficients model: three-step "
                    "penalized estimation and selection.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit a dataset from CSV")
    p_fit.add_argument("--data", required=True, help="input CSV (y, x1.., g1..)")
    p_fit.add_argument("--out", required=True, help="output directory")
    p_fit.add_argument("--knots", type=int, help="fix the interior knot count")
    p_fit.add_argument("--order", type=int, help="fix the spline order (2, 3, 4)")
    p_fit.add_argument("--seed", type=int, help="recorded in the report")
    _add_solver_flags(p_fit)

    p_sim = sub.add_parser("simulate", help="run a Monte Carlo study")
    p_sim.add_argument("--preset", required=True, choices=sorted(PRESETS),
                       help="scenario preset")
    p_sim.add_argument("--replicates", type=int, default=100)
    p_sim.add_argument("--seed", type=int, help="required: master RNG seed")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.add_argument("--n", type=int, help="sample size (default 500)")
    p_sim.add_argument("--p", type=int, help="gene count (default 50)")
    p_sim.add_argument("--q", type=int, help="loading count (default 5)")
    p_sim.add_argument("--noise-sd", dest="noise_sd", type=float)
    p_sim.add_argument("--threads", type=int, help="worker cap (default: all cores)")
    _add_solver_flags(p_sim)

    p_dump = sub.add_parser("basis-dump", help="dump basis values on a grid")
    p_dump.add_argument("--knots", type=int, required=True)
    p_dump.add_argument("--order", type=int, required=True)
    p_dump.add_argument("--out", required=True, help="output CSV file")
    p_dump.add_argument("--min", dest="u_min", type=float, default=0.0)
    p_dump.add_argument("--max", dest="u_max", type=float, default=1.0)
    return parser


def cmd_fit(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.data)
    model = fit(dataset, _solver_config(args), _tuning_config(args),
                knots=args.knots, order=args.order)
    files = write_fit_report(model, dataset, args.out)
    print(f"fit complete: {len(files)} files in {args.out}")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    if args.seed is None:
        raise ParameterError("simulate requires --seed (no hidden entropy)")
    scenario = ScenarioConfig(
        kind=PRESETS[args.preset],
        n=args.n or 500, p=args.p or 50, q=args.q or 5,
        replicates=args.replicates, seed=args.seed,
        noise_sd=args.noise_sd if args.noise_sd is not None else 1.0,
    )
    report = run_study(scenario, _solver_config(args), _tuning_config(args),
                       threads=args.threads)
    files = write_study_report(report, args.out)
    print(f"study complete: {len(files)} files in {args.out}")
    return EXIT_OK


def cmd_basis_dump(args: argparse.Namespace) -> int:
    spec = make_basis(args.u_min, args.u_max, args.knots, args.order)
    grid = np.linspace(args.u_min, args.u_max, 200)
    raw = raw_basis_matrix(spec, grid)
    transformed = raw.copy()
    transformed[:, 0] = 1.0
    out = Path(args.out)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
    L = spec.num_basis
    with out.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["u"] + [f"raw{l}" for l in range(1, L + 1)]
                        + [f"t{l}" for l in range(1, L + 1)])
        for j, u in enumerate(grid):
            writer.writerow(["{:.17g}".format(v)
                             for v in (u, *raw[j], *transformed[j])])
    print(f"basis dump written to {out}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _merge_config(args)
        if args.command == "fit":
            return cmd_fit(args)
        if args.command == "simulate":
            return cmd_simulate(args)
        return cmd_basis_dump(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ComputationError as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
