"""Seeded Monte Carlo campaigns over parameter grids.

A campaign is described by a JSON config::

    {
      "ensemble": {"kind": "partial_hadamard", "N": 64, "normalization": "unit_row_l2"},
      "m_grid": [8, 16, 24], "k_grid": [3], "q_grid": [2], "epsilon_grid": [0.0],
      "signal": {"law": "unit", "p": 1.0},
      "trials": 100, "master_seed": 0,
      "rho": {"mode": "none"},
      "solver": {"max_iter": 50000},
      "success_tol": 1e-6,
      "output": "results.csv"
    }

Every trial draws a fresh matrix unless ``ensemble.seed`` is given. Rows
of the results CSV come out in grid order whatever the worker count.
"""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bp import BpProblem, solve_bp
from .certify import (EXACT_DELTA, POSITIVITY_TOL, STABLE_DELTA, certify, rho_lower_bound, s_required,
                      sphere_noise)
from .cmsv import Budget, cmsv_oracle, estimate_cmsv
from .ensembles import KINDS, EnsembleSpec, generate, sparse_signal
from .errors import DomainError
from .linalg import spectral_norm
from .sparsity import best_k_term_error, format_q, norm, parse_q

SCHEMA_VERSION = 1
RHO_MODES = ("none", "multistart", "oracle", "lower_bound")
ORACLE_MAX_N = 10
THREADS_ENV = "CMSVKIT_THREADS"

COLUMNS = (
    "schema_version", "tuple_index", "trial", "kind", "m", "N", "k", "q", "epsilon", "law",
    "matrix_seed", "signal_seed", "noise_seed", "rho", "rho_method", "s_used",
    "exact_ok", "stable_ok", "sigma_k", "l1_bound", "lq_bound", "l1_bound_improved",
    "err_l1", "err_lq", "err_l2", "success", "bound_violation", "solver_status", "iterations",
)


def trial_seed(master_seed: int, tuple_index: int, trial: int, role: str) -> int:
    """Stable 64-bit seed for one random stream of one trial."""
    key = f"{master_seed}:{tuple_index}:{trial}:{role}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


@dataclass
class ExperimentConfig:
    kind: str
    N: int
    m_grid: list
    k_grid: list
    q_grid: list
    epsilon_grid: list = field(default_factory=lambda: [0.0])
    normalization: str = "unit_row_l2"
    matrix_seed: int | None = None
    law: str = "unit"
    p: float = 1.0
    trials: int = 1
    master_seed: int = 0
    rho_mode: str = "none"
    budget: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    success_tol: float = 1e-6
    output: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown ensemble {self.kind!r}")
        if self.trials < 1:
            raise DomainError("trials must be at least 1")
        for name in ("m_grid", "k_grid", "q_grid", "epsilon_grid"):
            if not getattr(self, name):
                raise DomainError(f"{name} must be nonempty")
        self.q_grid = [parse_q(q) for q in self.q_grid]
        if any(q <= 1 for q in self.q_grid):
            raise DomainError("q values must lie in (1, inf]")
        if any(not 1 <= k <= self.N for k in self.k_grid):
            raise DomainError(f"k values must lie in [1, {self.N}]")
        if any(e < 0 for e in self.epsilon_grid):
            raise DomainError("epsilon values must be non-negative")
        if self.rho_mode not in RHO_MODES:
            raise DomainError(f"rho mode must be one of {', '.join(RHO_MODES)}")
        if self.rho_mode == "oracle" and self.N > ORACLE_MAX_N:
            raise DomainError(f"the sampling oracle is limited to N <= {ORACLE_MAX_N}")
        # validates kind/m/N combinations early
        for m in self.m_grid:
            EnsembleSpec(self.kind, int(m), self.N, 0, self.normalization)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        ens = d.get("ensemble", {})
        sig = d.get("signal", {})
        rho = d.get("rho", {})
        try:
            return cls(
                kind=ens["kind"], N=int(ens["N"]), normalization=ens.get("normalization", "unit_row_l2"),
                matrix_seed=ens.get("seed"),
                m_grid=[int(m) for m in d["m_grid"]], k_grid=[int(k) for k in d["k_grid"]],
                q_grid=list(d["q_grid"]), epsilon_grid=[float(e) for e in d.get("epsilon_grid", [0.0])],
                law=sig.get("law", "unit"), p=float(sig.get("p", 1.0)),
                trials=int(d.get("trials", 1)), master_seed=int(d.get("master_seed", 0)),
                rho_mode=rho.get("mode", "none"), budget={k: v for k, v in rho.items() if k != "mode"},
                solver=dict(d.get("solver", {})), success_tol=float(d.get("success_tol", 1e-6)),
                output=d.get("output"),
            )
        except KeyError as exc:
            raise DomainError(f"config is missing {exc.args[0]!r}") from None

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def tuples(self) -> list[tuple]:
        return list(itertools.product(self.m_grid, self.k_grid, self.q_grid, self.epsilon_grid))


_RHO_CACHE: dict = {}


def _rho_for(A, q, k, mode, budget, seed):
    """CMSV value at the largest condition level that fits in [1, N]."""
    key = (A.tobytes(), A.shape, q, k, mode, json.dumps(budget, sort_keys=True), seed)
    if key not in _RHO_CACHE:
        _RHO_CACHE[key] = _compute_rho(A, q, k, mode, budget, seed)
    return _RHO_CACHE[key]


def _compute_rho(A, q, k, mode, budget, seed):
    n = A.shape[1]
    levels = [s for s in (s_required(q, k, STABLE_DELTA), s_required(q, k, EXACT_DELTA)) if s <= n]
    if mode == "none" or not levels:
        return None
    s = levels[0]
    if mode == "multistart":
        b = Budget(**{"seed": seed % 2**32, **budget})
        return estimate_cmsv(A, q, s, b)
    if mode == "oracle":
        return cmsv_oracle(A, q, s, **{"seed": seed % 2**32, **budget})
    return rho_lower_bound(A, q, s)


def run_trial(cfg: ExperimentConfig, tuple_index: int, trial: int) -> tuple[dict, float]:
    """One row of the results table and its wall time in seconds."""
    start = time.perf_counter()
    m, k, q, eps = cfg.tuples()[tuple_index]
    seeds = {role: trial_seed(cfg.master_seed, tuple_index, trial, role)
             for role in ("matrix", "signal", "noise", "rho")}
    if cfg.matrix_seed is not None:
        seeds["matrix"] = int(cfg.matrix_seed)
    A = generate(EnsembleSpec(cfg.kind, m, cfg.N, seeds["matrix"], cfg.normalization)).entries
    x = sparse_signal(cfg.N, k, seeds["signal"], cfg.law, cfg.p).entries
    e = sphere_noise(m, eps, seeds["noise"]) if eps > 0 else 0.0
    res = solve_bp(BpProblem(A, A @ x + e, eps), **cfg.solver)
    h = res.x_hat - x
    sigma, _ = best_k_term_error(x, k)
    row = {
        "schema_version": SCHEMA_VERSION, "tuple_index": tuple_index, "trial": trial,
        "kind": cfg.kind, "m": m, "N": cfg.N, "k": k, "q": format_q(q), "epsilon": eps, "law": cfg.law,
        "matrix_seed": seeds["matrix"], "signal_seed": seeds["signal"], "noise_seed": seeds["noise"],
        "sigma_k": sigma, "err_l1": norm(h, 1.0), "err_lq": norm(h, q), "err_l2": float(np.linalg.norm(h)),
        "solver_status": res.status, "iterations": res.iterations,
    }
    row["success"] = bool(res.status == "converged" and row["err_l2"] <= cfg.success_tol)
    # a fixed matrix shares one rho estimate across trials
    if cfg.matrix_seed is None:
        rho = _compute_rho(A, q, k, cfg.rho_mode, cfg.budget, seeds["rho"])
    else:
        rho = _rho_for(A, q, k, cfg.rho_mode, cfg.budget, trial_seed(cfg.master_seed, tuple_index, 0, "rho"))
    violation = False
    if rho is not None:
        cert = certify(q, k, rho, eps, sigma, scale=spectral_norm(A), positivity_tol=POSITIVITY_TOL)
        row.update(rho=rho.value, rho_method=rho.method, s_used=rho.s, exact_ok=cert.exact_ok,
                   stable_ok=cert.stable_ok, l1_bound=cert.l1_bound, lq_bound=cert.lq_bound,
                   l1_bound_improved=cert.l1_bound_improved)
        slack = 10 * cfg.solver.get("opt_tol", 1e-7)
        oracle_grade = rho.method in ("oracle", "lower_bound")
        if oracle_grade and cert.stable_ok and res.status == "converged":
            violation = bool(row["err_l1"] > cert.l1_bound_improved + slack
                             or row["err_lq"] > cert.lq_bound + slack)
    row["bound_violation"] = violation
    return row, time.perf_counter() - start


def _run_chunk(args):
    cfg, jobs = args
    return [run_trial(cfg, i, t) for i, t in jobs]


def worker_count() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise DomainError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> tuple[list[dict], list[float]]:
    """All trials in grid order; work is spread over ``workers`` processes."""
    jobs = [(i, t) for i in range(len(cfg.tuples())) for t in range(cfg.trials)]
    workers = min(workers or worker_count(), len(jobs))
    if workers <= 1:
        out = _run_chunk((cfg, jobs))
    else:
        chunks = [jobs[w::workers] for w in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, [(cfg, c) for c in chunks]))
        by_job = {}
        for chunk, part in zip(chunks, parts):
            by_job.update(zip(chunk, part))
        out = [by_job[j] for j in jobs]
    rows = [r for r, _ in out]
    times = [t for _, t in out]
    return rows, times


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return str(v)


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in COLUMNS])
    return buf.getvalue()


def summarize(cfg: ExperimentConfig, rows: list[dict]) -> dict:
    groups = []
    for i, (m, k, q, eps) in enumerate(cfg.tuples()):
        sel = [r for r in rows if r["tuple_index"] == i]
        groups.append({
            "tuple_index": i, "m": m, "k": k, "q": format_q(q), "epsilon": eps, "trials": len(sel),
            "success_rate": sum(r["success"] for r in sel) / len(sel),
            "mean_err_l1": float(np.mean([r["err_l1"] for r in sel])),
            "mean_err_l2": float(np.mean([r["err_l2"] for r in sel])),
            "bound_violations": sum(r["bound_violation"] for r in sel),
            "not_converged": sum(r["solver_status"] != "converged" for r in sel),
        })
    return {
        "schema_version": SCHEMA_VERSION,
        "rows": len(rows),
        "bound_violations": sum(r["bound_violation"] for r in rows),
        "groups": groups,
    }


def write_outputs(cfg: ExperimentConfig, rows, times, out_path) -> dict:
    """Write the results CSV, ``<stem>.summary.json`` and ``<stem>.timings.csv``.

    Wall times live in the sidecar so the results file stays byte-identical
    across reruns.
    """
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(rows_to_csv(rows))
    summary = summarize(cfg, rows)
    stem = out_path.with_suffix("")
    Path(f"{stem}.summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    lines = ["tuple_index,trial,wall_time_s"]
    lines += [f"{r['tuple_index']},{r['trial']},{t:.6f}" for r, t in zip(rows, times)]
    Path(f"{stem}.timings.csv").write_text("\n".join(lines) + "\n")
    return summary
