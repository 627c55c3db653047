"""Command-line interface.

Subcommands::

    equal estimate  -i X.csv -o omega.csv --lam 0.3 [--method equals]
    equal path      -i X.csv -o path.csv [--grid-size 50]
    equal cv        -i X.csv -o omega.csv [--folds 5 --seed 0]
    equal simulate  --case case2 --p 50 --n 200 --reps 3 -o rows.csv
    equal bench     --cases case1 --p-list 100,200 -o timing.csv

Data files are comma-separated with rows as samples; ``--header`` skips one
header row. Matrices are written with 17 significant digits so they round-trip
exactly. Exit status is 0 on success, 2 for usage or input errors and 3 for
numerical failures.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .admm import AdmmConfig, fit, lambda_grid, offdiag_sparsity
from .baseline_glasso import glasso_fit
from .errors import InvalidInputError, NumericalFailureError
from .experiments import METHODS, method_config, bench_timing, cross_validate, path_estimates, simulate
from .matrix_core import as_data_matrix, sample_covariance, thin_svd_gram
from .penalties import Family, PenaltySpec, lla_weights

logger = logging.getLogger("equal")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
#: Optional override for the number of worker threads used by cv/simulate.
THREADS_ENV = "EQUAL_NUM_THREADS"


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- file helpers

def read_csv_matrix(path, header: bool = False) -> np.ndarray:
    """Read a numeric CSV into an (n, p) array, rejecting ragged rows."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc}") from exc
    if header:
        rows = rows[1:]
    if not rows:
        raise InvalidInputError(f"{path} has no data rows")
    width = len(rows[0])
    for i, r in enumerate(rows):
        if len(r) != width:
            raise InvalidInputError(f"{path}: row {i + 1} has {len(r)} fields, expected {width}")
    try:
        X = np.array([[float(c) for c in r] for r in rows])
    except ValueError as exc:
        raise InvalidInputError(f"{path}: non-numeric field ({exc})") from exc
    return as_data_matrix(X)


def format_matrix(M) -> str:
    return "".join(",".join(f"{v:.17g}" for v in row) + "\n" for row in np.asarray(M))


def format_table(rows: Sequence[dict]) -> str:
    if not rows:
        return ""
    cols = list(rows[0])
    lines = [",".join(cols)]
    for r in rows:
        lines.append(",".join(_cell(r[c]) for c in cols))
    return "\n".join(lines) + "\n"


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, (np.integer, np.bool_)):
        return v.item()
    return v


def write_outputs(files: dict) -> None:
    """Write all outputs at the end so failures never leave partial results."""
    for path, text in files.items():
        Path(path).write_text(text)


def sidecar_path(output, report=None) -> Path:
    return Path(report) if report else Path(output).with_suffix(".json")


def _dump(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


# ------------------------------------------------------------------- builders

def _config(args) -> AdmmConfig:
    return AdmmConfig(rho=args.rho, max_iter=args.max_iter, tol_abs=args.tol_abs, tol_rel=args.tol_rel)


def _penalty(args, lam: float = 0.0) -> PenaltySpec:
    return PenaltySpec(lam=lam, penalize_diagonal=not args.no_penalize_diagonal)


def _jobs(args) -> int:
    if getattr(args, "jobs", None):
        return args.jobs
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"{THREADS_ENV} must be an integer, got {env!r}")
    return 1


def _grid(args, X) -> np.ndarray:
    if args.lambdas:
        grid = np.array(sorted(_floats(args.lambdas), reverse=True))
        if np.any(grid < 0) or np.any(np.diff(grid) == 0):
            raise InvalidInputError("lambdas must be distinct and nonnegative")
        return grid
    S = sample_covariance(X, args.center)
    return lambda_grid(S, X.shape[0], args.grid_size, offdiagonal=args.no_penalize_diagonal)


def _floats(text: str) -> List[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> List[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}")


def _methods(text: str) -> List[str]:
    out = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in out if m not in METHODS]
    if bad or not out:
        raise UsageError(f"unknown method(s) {bad}; choose from {list(METHODS)}")
    return out


def _fit_one(X, lam, args):
    """Fit at one lambda, followed by a one-step LLA refit for SCAD/MCP."""
    cfg = _config(args)
    penalty = _penalty(args, lam)
    if args.method == "glasso":
        S = sample_covariance(X, args.center)
        res = glasso_fit(S, penalty, cfg)
        refit = lambda pen, warm: glasso_fit(S, pen, cfg, warm=warm)
    else:
        svd = thin_svd_gram(X, args.center)
        cfg = method_config(args.method, cfg)
        res = fit(svd, penalty, cfg)
        refit = lambda pen, warm: fit(svd, pen, cfg, warm=warm)
    family = Family(args.family)
    if family is not Family.LASSO:
        W = lla_weights(res.estimate, family, lam, args.tau)
        pen = PenaltySpec(lam=lam, family=family, tau=args.tau, weights=W, penalize_diagonal=False)
        res = refit(pen, res.state)
    return res


def _diagnostics(res) -> dict:
    est = res.estimate
    return {
        "lambda": res.lam,
        "iterations": res.iterations,
        "converged": res.converged,
        "objective": res.objective,
        "kkt_residual": res.kkt_residual,
        "min_eigen": float(np.linalg.eigvalsh(0.5 * (est + est.T))[0]),
        "sparsity": offdiag_sparsity(est),
    }


# ------------------------------------------------------------------- commands

def cmd_estimate(args) -> int:
    if args.lam is None:
        raise UsageError("estimate needs --lam")
    X = read_csv_matrix(args.input, args.header)
    res = _fit_one(X, args.lam, args)
    report = {"method": args.method, "family": args.family, **_diagnostics(res)}
    write_outputs({args.output: format_matrix(res.estimate),
                   sidecar_path(args.output, args.report): _dump(report)})
    return EXIT_OK


def cmd_path(args) -> int:
    X = read_csv_matrix(args.input, args.header)
    grid = _grid(args, X)
    cfg = _config(args)
    fits = path_estimates(X, grid, args.method, _penalty(args), cfg, args.center)
    rows = [_diagnostics(f) for f in fits]
    write_outputs({args.output: format_table(rows)})
    return EXIT_OK


def cmd_cv(args) -> int:
    X = read_csv_matrix(args.input, args.header)
    grid = _grid(args, X)
    cfg = _config(args)
    cv = cross_validate(X, grid, args.folds, args.method, cfg, _penalty(args), seed=args.seed,
                        center=args.center, n_jobs=_jobs(args))
    best = int(np.flatnonzero(grid == cv.best_lambda)[0])
    fits = path_estimates(X, grid[: best + 1], args.method, _penalty(args), cfg, args.center)
    report = {"method": args.method, "best_lambda": cv.best_lambda, "fold_count": cv.fold_count,
              "seed": args.seed, "grid": grid, "cv_curve": cv.cv_curve, **_diagnostics(fits[-1])}
    write_outputs({args.output: format_matrix(fits[-1].estimate),
                   sidecar_path(args.output, args.report): _dump(report)})
    return EXIT_OK


def cmd_simulate(args) -> int:
    methods = _methods(args.methods)
    rows = simulate(args.case, args.p, args.n, args.reps, methods, seed=args.seed,
                    grid_size=args.grid_size, folds=args.folds, cfg=_config(args),
                    penalize_diagonal=not args.no_penalize_diagonal, n_jobs=_jobs(args))
    write_outputs({args.output: _rows_text(rows, args.output)})
    return EXIT_OK


def cmd_bench(args) -> int:
    methods = _methods(args.methods)
    rows = bench_timing(args.cases.split(","), _ints(args.p_list), args.n, args.grid_size, methods,
                        args.reps, seed=args.seed, cfg=_config(args))
    write_outputs({args.output: _rows_text(rows, args.output)})
    return EXIT_OK


def _rows_text(rows, output) -> str:
    return _dump(rows) if str(output).endswith(".json") else format_table(rows)


# --------------------------------------------------------------------- parser

def _admm_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("ADMM")
    g.add_argument("--rho", type=float, default=1.0)
    g.add_argument("--max-iter", type=int, default=1000)
    g.add_argument("--tol-abs", type=float, default=1e-6)
    g.add_argument("--tol-rel", type=float, default=1e-4)
    p.add_argument("--no-penalize-diagonal", action="store_true",
                   help="leave the diagonal unpenalized")


def _data_options(p: argparse.ArgumentParser, method_default="equals") -> None:
    p.add_argument("-i", "--input", required=True, help="CSV data, rows are samples")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--header", action="store_true", help="skip one header row")
    p.add_argument("--center", action="store_true", help="center columns before estimation")
    p.add_argument("--method", choices=METHODS, default=method_default)


def _grid_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--grid-size", type=int, default=50)
    p.add_argument("--lambdas", help="explicit comma-separated grid (overrides --grid-size)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="equal", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="estimate a precision matrix at one lambda")
    _data_options(p)
    p.add_argument("--lam", type=float)
    p.add_argument("--family", choices=[f.value for f in Family], default="lasso")
    p.add_argument("--tau", type=float)
    p.add_argument("--report", help="JSON sidecar path (default: output with .json suffix)")
    _admm_options(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("path", help="solution path diagnostics over a lambda grid")
    _data_options(p)
    _grid_options(p)
    _admm_options(p)
    p.set_defaults(func=cmd_path)

    p = sub.add_parser("cv", help="k-fold cross-validation and refit")
    _data_options(p)
    _grid_options(p)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, help=f"worker threads (default ${THREADS_ENV} or 1)")
    p.add_argument("--report")
    _admm_options(p)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("simulate", help="replicated simulation with CV-tuned lambda")
    p.add_argument("--case", default="case2", choices=["case1", "case2", "case3"])
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--methods", default="equal,equals")
    p.add_argument("--grid-size", type=int, default=50)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int)
    p.add_argument("-o", "--output", required=True, help="CSV, or JSON if the name ends in .json")
    _admm_options(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="solution-path timing")
    p.add_argument("--cases", default="case1")
    p.add_argument("--p-list", default="100,200")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--methods", default="equal,equals")
    p.add_argument("--grid-size", type=int, default=50)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    _admm_options(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, InvalidInputError) as exc:
        print(f"equal {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalFailureError as exc:
        print(f"equal {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
