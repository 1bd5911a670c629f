"""Command-line front end: ``cmsvkit <subcommand> ...``.

Exit codes: 0 success, 2 usage or domain error, 3 unreachable
measurement threshold, 4 bound violation in an experiment.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bp import OPT_TOL, BpProblem, solve_bp, verify_optimality
from .certify import STABLE_DELTA, certify, rho_lower_bound, s_required
from .cmsv import Budget, CmsvEstimate, cmsv_oracle, estimate_cmsv
from .ensembles import KINDS, NORMALIZATIONS, ComplexityQuery, EnsembleSpec, generate, min_measurements
from .errors import DomainError, ThresholdUnreachable
from .experiment import ORACLE_MAX_N, ExperimentConfig, run_experiment, write_outputs
from .linalg import spectral_norm
from .matrix import load_matrix, save_matrix
from .sparsity import format_q, parse_q

EXIT_OK, EXIT_USAGE, EXIT_UNREACHABLE, EXIT_VIOLATION = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _q(value: str) -> float:
    try:
        return parse_q(value)
    except (DomainError, ValueError):
        raise argparse.ArgumentTypeError(f"invalid q {value!r}") from None


def _load_vector(path) -> np.ndarray:
    text = Path(path).read_text().replace(",", " ")
    return np.array([float(v) for v in text.split()])


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def _budget(args) -> Budget:
    return Budget(restarts=args.restarts, iterations=args.iterations, seed=args.seed)


def cmd_gen_matrix(args) -> int:
    spec = EnsembleSpec(args.kind, args.m, args.n, args.seed, args.normalization)
    out = args.out or f"{args.kind}_m{args.m}_n{args.n}_s{args.seed}.csv"
    csv_path, hpath = save_matrix(generate(spec), out)
    print(csv_path)
    print(hpath)
    return EXIT_OK


def cmd_cmsv(args) -> int:
    A = load_matrix(args.matrix)
    if args.oracle:
        if A.N > ORACLE_MAX_N:
            raise UsageError(f"--oracle samples the whole q-sphere and is limited to N <= {ORACLE_MAX_N} "
                             f"(got N = {A.N}); drop --oracle to use the multi-start estimator")
        est = cmsv_oracle(A.entries, args.q, args.s, n_samples=args.samples, seed=args.seed)
    else:
        est = estimate_cmsv(A.entries, args.q, args.s, _budget(args))
    _emit(est.to_dict())
    return EXIT_OK


def cmd_solve(args) -> int:
    A = load_matrix(args.matrix)
    y = _load_vector(args.y)
    problem = BpProblem(A.entries, y, args.epsilon)
    res = solve_bp(problem, max_iter=args.max_iter, opt_tol=args.opt_tol)
    report = verify_optimality(problem, res.x_hat, res.dual, opt_tol=args.opt_tol)
    _emit({
        "x_hat": [float(v) for v in res.x_hat],
        "objective": res.objective,
        "residual": res.residual,
        "iterations": res.iterations,
        "status": res.status,
        "gap": report["gap"],
    })
    return EXIT_OK


def cmd_certify(args) -> int:
    q = args.q
    if args.rho is not None:
        if args.s is None:
            raise UsageError("--rho needs --s (the level the value was computed at)")
        rho = CmsvEstimate(q, args.s, args.rho, np.zeros(0), "external", 0, 0.0)
        scale = 1.0
    else:
        if args.matrix is None:
            raise UsageError("give --matrix or --rho/--s")
        A = load_matrix(args.matrix).entries
        s = args.s if args.s is not None else s_required(q, args.k, STABLE_DELTA)
        if s > A.shape[1]:
            raise UsageError(f"level s = {s:.6g} exceeds N = {A.shape[1]}; the condition cannot hold")
        if args.method == "oracle":
            if A.shape[1] > ORACLE_MAX_N:
                raise UsageError(f"the oracle is limited to N <= {ORACLE_MAX_N}")
            rho = cmsv_oracle(A, q, s, seed=args.seed)
        elif args.method == "lower-bound":
            rho = rho_lower_bound(A, q, s)
        else:
            rho = estimate_cmsv(A, q, s, _budget(args))
        scale = spectral_norm(A)
    cert = certify(q, args.k, rho, args.epsilon, args.sigma, scale=scale)
    _emit(cert.to_dict())
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    out = args.out or cfg.output
    if not out:
        raise UsageError("no output path: pass --out or set \"output\" in the config")
    rows, times = run_experiment(cfg, workers=args.workers)
    summary = write_outputs(cfg, rows, times, out)
    if args.plot:
        from .plotting import phase_plot

        phase_plot(summary, Path(out).with_suffix(".png"))
    for g in summary["groups"]:
        print(f"m={g['m']} k={g['k']} q={g['q']} eps={g['epsilon']:g} "
              f"success={g['success_rate']:.3f} violations={g['bound_violations']}")
    if summary["bound_violations"]:
        print(f"bound violations: {summary['bound_violations']}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_min_measurements(args) -> int:
    query = ComplexityQuery(args.delta, args.k, args.n, args.M, args.C, args.q)
    try:
        m = min_measurements(query)
    except ThresholdUnreachable as exc:
        print(f"unreachable: {exc}", file=sys.stderr)
        return EXIT_UNREACHABLE
    print(f"{m} {query.branch}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cmsvkit", description="q-ratio CMSV, basis pursuit and recovery bounds")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-matrix", help="draw a measurement matrix and write CSV + JSON header")
    g.add_argument("--kind", choices=KINDS, required=True)
    g.add_argument("--n", type=int, required=True, help="signal length N")
    g.add_argument("--m", type=int, required=True, help="number of measurements")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--normalization", choices=NORMALIZATIONS, default="unit_row_l2")
    g.add_argument("--out", help="CSV path (header goes next to it with a .json suffix)")
    g.set_defaults(func=cmd_gen_matrix)

    def add_budget(sp):
        sp.add_argument("--restarts", type=int, default=64)
        sp.add_argument("--iterations", type=int, default=500)
        sp.add_argument("--seed", type=int, default=0)

    c = sub.add_parser("cmsv", help="estimate rho_{q,s}(A)")
    c.add_argument("--matrix", required=True)
    c.add_argument("--q", type=_q, required=True)
    c.add_argument("--s", type=float, required=True)
    c.add_argument("--oracle", action="store_true", help=f"brute-force reference (N <= {ORACLE_MAX_N})")
    c.add_argument("--samples", type=int, default=100_000)
    add_budget(c)
    c.set_defaults(func=cmd_cmsv)

    s = sub.add_parser("solve", help="basis pursuit (denoising when --epsilon > 0)")
    s.add_argument("--matrix", required=True)
    s.add_argument("--y", required=True, help="file of m numbers (whitespace or comma separated)")
    s.add_argument("--epsilon", type=float, default=0.0)
    s.add_argument("--max-iter", type=int, default=50_000)
    s.add_argument("--opt-tol", type=float, default=OPT_TOL)
    s.set_defaults(func=cmd_solve)

    ce = sub.add_parser("certify", help="recovery conditions and error bounds")
    ce.add_argument("--q", type=_q, required=True)
    ce.add_argument("--k", type=int, required=True)
    ce.add_argument("--matrix")
    ce.add_argument("--s", type=float, help="level of rho (default 4**(q/(q-1)) k)")
    ce.add_argument("--rho", type=float, help="use this rho value instead of estimating it")
    ce.add_argument("--method", choices=("multistart", "oracle", "lower-bound"), default="multistart")
    ce.add_argument("--epsilon", type=float, default=0.0)
    ce.add_argument("--sigma", type=float, default=0.0, help="best k-term l1 error of the signal class")
    add_budget(ce)
    ce.set_defaults(func=cmd_certify)

    e = sub.add_parser("experiment", help="run a Monte Carlo campaign from a JSON config")
    e.add_argument("--config", required=True)
    e.add_argument("--out", help="results CSV path (overrides the config)")
    e.add_argument("--workers", type=int, help="process count (default: CMSVKIT_THREADS or CPU count)")
    e.add_argument("--plot", action="store_true", help="also write a success-rate PNG next to the CSV")
    e.set_defaults(func=cmd_experiment)

    mm = sub.add_parser("min-measurements", help="smallest m meeting the structured-ensemble threshold")
    mm.add_argument("--delta", type=float, required=True)
    mm.add_argument("--k", type=int, required=True)
    mm.add_argument("--n", type=int, required=True, help="signal length N")
    mm.add_argument("--M", type=float, default=1.0, help="common row l2 norm of the parent system")
    mm.add_argument("--C", type=float, default=1.0, help="constant of the threshold formula")
    mm.add_argument("--q", type=_q, required=True)
    mm.set_defaults(func=cmd_min_measurements)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, DomainError, ValueError, FileNotFoundError) as exc:
        print(f"cmsvkit {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
