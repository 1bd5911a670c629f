"""Basis Pursuit (equality and noise-ball constrained) by ADMM.

Both problems are written as ``min ||x||_1 + i_C(z)`` subject to ``x = z``
with ``C = {z : ||A z - y||_2 <= eps}``. The ``x`` step is soft
thresholding, the ``z`` step the exact projection onto ``C`` and the
scaled dual ``u`` is updated with the splitting residual. Because ``u``
always lies in the row space of ``A`` it yields a dual vector ``lam`` with
``A^T lam = -beta u``, which after rescaling into ``||A^T lam||_inf <= 1``
certifies the duality gap.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .linalg import ResidualBallProjector, spectral_norm

log = logging.getLogger(__name__)

FEAS_TOL_EXACT = 1e-9
FEAS_TOL_NOISY = 1e-8
OPT_TOL = 1e-7
MAX_ITER = 50_000


@dataclass
class BpProblem:
    A: np.ndarray
    y: np.ndarray
    epsilon: float = 0.0

    def __post_init__(self):
        self.A = np.asarray(getattr(self.A, "entries", self.A), dtype=float)
        self.y = np.asarray(self.y, dtype=float).ravel()
        if self.A.ndim != 2 or self.y.size != self.A.shape[0]:
            raise ValueError("y must have one entry per row of A")
        if not np.isfinite(self.epsilon) or self.epsilon < 0:
            raise ValueError("epsilon must be finite and non-negative")
        if not (np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.y))):
            raise ValueError("non-finite problem data")


@dataclass
class RecoveryResult:
    x_hat: np.ndarray
    objective: float
    residual: float
    iterations: int
    status: str
    dual: np.ndarray | None = None
    gap: float = np.inf
    history: list = field(default_factory=list, repr=False)


def soft_threshold(v, tau):
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def dual_objective(problem: BpProblem, lam) -> float:
    return float(problem.y @ lam - problem.epsilon * np.linalg.norm(lam))


def scale_dual(A, lam):
    """Shrink ``lam`` into the dual feasible set ``||A^T lam||_inf <= 1``."""
    peak = np.max(np.abs(A.T @ lam)) if lam.size else 0.0
    return lam / peak if peak > 1.0 else lam


def verify_optimality(problem: BpProblem, x_hat, dual=None, opt_tol: float = OPT_TOL,
                      feas_tol: float | None = None) -> dict:
    """Duality-gap report for a candidate solution.

    ``dual`` is the solver's dual iterate (``RecoveryResult.dual``); when it
    is missing a least-squares dual is fitted to the sign pattern of
    ``x_hat``. The gap is ``||x_hat||_1`` minus the dual objective of the
    rescaled, feasible dual vector.
    """
    A, y = problem.A, problem.y
    x_hat = np.asarray(x_hat, dtype=float)
    if feas_tol is None:
        feas_tol = FEAS_TOL_EXACT if problem.epsilon == 0 else FEAS_TOL_NOISY
    if dual is None:
        support = np.abs(x_hat) > 1e-12 * max(1.0, np.max(np.abs(x_hat), initial=0.0))
        if np.any(support):
            lam, *_ = np.linalg.lstsq(A[:, support].T, np.sign(x_hat[support]), rcond=None)
        else:
            lam = np.zeros(A.shape[0])
    else:
        lam = np.asarray(dual, dtype=float)
    lam = scale_dual(A, lam)
    primal = float(np.abs(x_hat).sum())
    residual = float(np.linalg.norm(A @ x_hat - y))
    gap = primal - dual_objective(problem, lam)
    scale = max(1.0, primal)
    feasible = residual <= problem.epsilon + feas_tol * max(1.0, np.linalg.norm(y))
    return {
        "primal": primal,
        "dual": dual_objective(problem, lam),
        "gap": gap,
        "residual": residual,
        "feasible": bool(feasible),
        "gap_flag": bool(gap > opt_tol * scale),
        "ok": bool(feasible and gap <= opt_tol * scale),
    }


def _support_polish(problem: BpProblem, z, tol: float = 1e-8):
    """Least-squares refit of an equality-constrained solution on its support."""
    A, y = problem.A, problem.y
    top = np.max(np.abs(z), initial=0.0)
    support = np.abs(z) > tol * top
    if not np.any(support) or support.sum() > A.shape[0]:
        return None
    coef, *_ = np.linalg.lstsq(A[:, support], y, rcond=None)
    if np.any(np.sign(coef) != np.sign(z[support])):
        return None
    cand = np.zeros_like(z)
    cand[support] = coef
    return cand


def _vertex_certificate(problem: BpProblem, x, feas_tol: float):
    """Try to finish a noise-free solve from the support of ``x``.

    Refits on the support and fits the dual to the sign pattern; returns
    ``(candidate, dual)`` when the candidate is feasible, else ``None``.
    """
    cand = _support_polish(problem, x, tol=0.0)
    if cand is None:
        return None
    A, y = problem.A, problem.y
    if np.linalg.norm(A @ cand - y) > feas_tol * max(1.0, np.linalg.norm(y)):
        return None
    support = cand != 0
    lam, *_ = np.linalg.lstsq(A[:, support].T, np.sign(cand[support]), rcond=None)
    return cand, scale_dual(A, lam)


def solve_bp(problem: BpProblem, feas_tol: float | None = None, opt_tol: float = OPT_TOL,
             max_iter: int = MAX_ITER, check_every: int = 10, record_history: bool = False,
             relax: float = 1.6, adapt_every: int = 50) -> RecoveryResult:
    """Solve ``min ||z||_1`` s.t. ``||A z - y||_2 <= epsilon`` (``= y`` at 0).

    Returns the best feasible iterate. ``status`` is ``"converged"`` once the
    certified duality gap is below ``opt_tol * max(1, ||x||_1)``,
    ``"max_iter"`` if the budget runs out and ``"infeasible"`` when the
    constraint set is empty.
    """
    A, y, eps = problem.A, problem.y, float(problem.epsilon)
    m, n = A.shape
    if feas_tol is None:
        feas_tol = FEAS_TOL_EXACT if eps == 0 else FEAS_TOL_NOISY
    ynorm = float(np.linalg.norm(y))
    zero = np.zeros(n)
    if ynorm <= eps:
        # the origin is feasible and l1-minimal
        return RecoveryResult(zero, 0.0, ynorm, 0, "converged", np.zeros(m), 0.0)

    proj = ResidualBallProjector(A, y, eps)
    if not proj.feasible:
        z = proj(zero)
        return RecoveryResult(z, float(np.abs(z).sum()), proj.residual(z), 0, "infeasible")

    # penalty ~ 1 / typical |x|, from ||y|| ~ ||A|| ||x||
    beta = spectral_norm(A) / ynorm
    z = proj(zero)
    u = np.zeros(n)
    best = z.copy()
    best_obj = float(np.abs(z).sum())
    best_lam = np.zeros(m)
    best_dual = -np.inf
    history = []
    status = "max_iter"
    it = 0
    r = s = 0.0
    for it in range(1, max_iter + 1):
        x = soft_threshold(z - u, 1.0 / beta)
        z_old = z
        xr = relax * x + (1.0 - relax) * z_old
        z = proj(xr + u)
        u += xr - z
        obj = float(np.abs(z).sum())
        if obj < best_obj:
            best_obj, best = obj, z.copy()
        if record_history:
            history.append(best_obj)

        if it % check_every == 0:
            w = -beta * u
            lam = proj.U @ ((proj.Vt @ w) / proj.s)
            lam = scale_dual(A, lam)
            d = dual_objective(problem, lam)
            if d > best_dual:
                best_dual, best_lam = d, lam
            r = np.linalg.norm(x - z)
            s = beta * np.linalg.norm(z - z_old)
            scale = max(1.0, best_obj)
            if best_obj - best_dual <= opt_tol * scale and r <= 1e-9 * max(1.0, np.linalg.norm(z)):
                status = "converged"
                break
        if eps == 0 and it % adapt_every == 0:
            fin = _vertex_certificate(problem, x, feas_tol)
            if fin is not None:
                cand, lam = fin
                cand_obj = float(np.abs(cand).sum())
                d = dual_objective(problem, lam)
                if d > best_dual:
                    best_dual, best_lam = d, lam
                if cand_obj < best_obj:
                    best_obj, best = cand_obj, cand
                if best_obj - best_dual <= opt_tol * max(1.0, best_obj):
                    status = "converged"
                    break
        if it % adapt_every == 0:
            # residual balancing
            if r > 10 * s:
                beta *= 2.0
                u /= 2.0
            elif s > 10 * r:
                beta /= 2.0
                u *= 2.0

    if eps == 0:
        cand = _support_polish(problem, best)
        if cand is not None and proj.residual(cand) <= feas_tol * max(1.0, ynorm):
            cand_obj = float(np.abs(cand).sum())
            if cand_obj <= best_obj + opt_tol * max(1.0, best_obj):
                best, best_obj = cand, cand_obj
    gap = best_obj - best_dual
    if status == "max_iter" and gap <= opt_tol * max(1.0, best_obj):
        status = "converged"
    log.debug("bp: %d iterations, status %s, gap %.3g", it, status, gap)
    return RecoveryResult(best, best_obj, proj.residual(best), it, status, best_lam, gap, history)
