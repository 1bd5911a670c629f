"""Sufficient conditions and error bounds for l1 recovery driven by rho_{q,s}(A)."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .bp import OPT_TOL, BpProblem, solve_bp
from .cmsv import CmsvEstimate, cmsv_inf_exact
from .errors import ConditionNotMet, DomainError
from .linalg import spectral_norm
from .sparsity import Signal, best_k_term_error, format_q, k_power, norm, parse_q, q_conjugate

POSITIVITY_TOL = 1e-6
EXACT_DELTA = 2.0
STABLE_DELTA = 4.0


def s_required(q, k: int, delta: float) -> float:
    """``delta**(q/(q-1)) * k``; the exponent is 1 at q = inf."""
    if k < 1:
        raise DomainError(f"k must be positive, got {k}")
    return float(delta) ** q_conjugate(parse_q(q)) * k


def _positive(value: float, scale: float, tol: float) -> bool:
    return value > tol * scale


@dataclass(frozen=True)
class Verdict:
    ok: bool
    s_required: float
    s_used: float
    rho: float


def check_exact(q, k: int, rho: CmsvEstimate, positivity_tol: float = POSITIVITY_TOL,
                scale: float = 1.0) -> Verdict:
    """Exact-recovery condition: ``rho.s >= 2**(q/(q-1)) k`` and ``rho > 0``.

    ``scale`` is the spectral norm of the matrix the estimate came from;
    positivity is judged relative to it.
    """
    need = s_required(q, k, EXACT_DELTA)
    ok = rho.s >= need and _positive(rho.value, scale, positivity_tol)
    return Verdict(bool(ok), need, rho.s, rho.value)


def check_stable(q, k: int, rho: CmsvEstimate, positivity_tol: float = POSITIVITY_TOL,
                 scale: float = 1.0) -> Verdict:
    """Stable/robust condition: ``rho.s >= 4**(q/(q-1)) k`` and ``rho > 0``."""
    need = s_required(q, k, STABLE_DELTA)
    ok = rho.s >= need and _positive(rho.value, scale, positivity_tol)
    return Verdict(bool(ok), need, rho.s, rho.value)


def stable_bounds(q, k: int, sigma_k: float) -> tuple[float, float]:
    """Noise-free error bounds ``(4 sigma, k**(1/q-1) sigma)``."""
    q = parse_q(q)
    if sigma_k < 0:
        raise DomainError("sigma_k must be non-negative")
    return 4.0 * sigma_k, sigma_k / k_power(k, q)


def robust_bounds(q, k: int, sigma_k: float, epsilon: float, rho_value: float) -> tuple[float, float, float]:
    """Noisy error bounds ``(l1, lq, l1_improved)``.

    ``l1 = 4 sigma + 8 eps k**(1-1/q) / rho``, ``lq = k**(1/q-1) sigma + 2 eps / rho``
    and the sharper ``l1_improved = 4 sigma + 4 eps k**(1-1/q) / rho``.
    """
    q = parse_q(q)
    if not rho_value > 0:
        raise ConditionNotMet(f"bounds need rho > 0, got {rho_value}")
    if epsilon < 0:
        raise DomainError("epsilon must be non-negative")
    l1s, lqs = stable_bounds(q, k, sigma_k)
    kp = k_power(k, q)
    return (l1s + 8.0 * epsilon * kp / rho_value,
            lqs + 2.0 * epsilon / rho_value,
            l1s + 4.0 * epsilon * kp / rho_value)


@dataclass
class BoundCertificate:
    q: float
    k: int
    s_required: float
    s_used: float
    rho: float
    epsilon: float
    sigma_k: float
    exact_ok: bool
    stable_ok: bool
    robust_ok: bool
    l1_bound: float
    lq_bound: float
    l1_bound_improved: float
    empirical_flag: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        for key, v in d.items():
            if isinstance(v, float) and math.isinf(v):
                d[key] = "inf"
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def certify(q, k: int, rho: CmsvEstimate, epsilon: float = 0.0, sigma_k: float = 0.0,
            scale: float = 1.0, positivity_tol: float = POSITIVITY_TOL) -> BoundCertificate:
    """Evaluate all three recovery conditions and the bounds they imply.

    Bounds that are undefined (``rho`` not positive with ``epsilon > 0``)
    are reported as ``inf``. ``empirical_flag`` is set when ``rho`` comes
    from local search, which only bounds the true value from above.
    """
    q = parse_q(q)
    exact = check_exact(q, k, rho, positivity_tol, scale)
    stable = check_stable(q, k, rho, positivity_tol, scale)
    if _positive(rho.value, scale, positivity_tol):
        l1, lq, l1i = robust_bounds(q, k, sigma_k, epsilon, rho.value)
    elif epsilon == 0:
        l1, lq = stable_bounds(q, k, sigma_k)
        l1i = l1
    else:
        l1 = lq = l1i = math.inf
    return BoundCertificate(
        q=q, k=k, s_required=stable.s_required, s_used=rho.s, rho=rho.value, epsilon=float(epsilon),
        sigma_k=float(sigma_k), exact_ok=exact.ok, stable_ok=stable.ok, robust_ok=stable.ok,
        l1_bound=l1, lq_bound=lq, l1_bound_improved=l1i, empirical_flag=rho.method == "multistart",
    )


def rho_lower_bound(A, q, s: float) -> CmsvEstimate:
    """Oracle-grade lower bound on ``rho_{q,s}(A)`` valid for any N.

    Uses the exact q = inf value and ``rho_{q,s} >= rho_{inf,s} / s``. The
    returned witness is the q = inf minimiser; only ``value`` carries the
    bound, so the method tag is ``"lower_bound"``.
    """
    q = parse_q(q)
    est = cmsv_inf_exact(A, s)
    if math.isinf(q):
        return est
    return CmsvEstimate(q, float(s), est.value / s, est.witness, "lower_bound", est.restarts,
                        est.converged_fraction, extra={"rho_inf": est.value})


def sphere_noise(m: int, epsilon: float, seed: int) -> np.ndarray:
    """Noise with a uniform direction and radius ``epsilon * U(0, 1)``."""
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(m)
    u /= np.linalg.norm(u)
    return epsilon * rng.random() * u


@dataclass
class ValidationRecord:
    q: float
    k: int
    epsilon: float
    rho: float
    sigma_k: float
    err_l1: float
    err_lq: float
    err_l2: float
    l1_bound: float
    lq_bound: float
    l1_bound_improved: float
    slack: float
    status: str
    passed: bool | None

    @property
    def margin_l1(self) -> float:
        return self.l1_bound_improved + self.slack - self.err_l1

    @property
    def margin_lq(self) -> float:
        return self.lq_bound + self.slack - self.err_lq

    def to_dict(self) -> dict:
        d = asdict(self)
        d["q"] = format_q(self.q)
        d["margin_l1"] = self.margin_l1
        d["margin_lq"] = self.margin_lq
        return d


def validate_run(A, x, q, k: int, epsilon: float, rho: CmsvEstimate, noise_seed: int = 0,
                 solver: dict | None = None, slack: float = 10 * OPT_TOL) -> ValidationRecord:
    """Solve BP on ``y = A x + e`` and compare the error with the bounds.

    ``rho`` must be evaluated at ``s >= 4**(q/(q-1)) k``. A solver that
    does not converge yields ``passed = None`` (inconclusive), never a
    violation. The l1 check uses the sharper ``4 eps`` bound, which implies
    the ``8 eps`` one.
    """
    q = parse_q(q)
    entries = x.entries if isinstance(x, Signal) else np.asarray(x, dtype=float)
    A_arr = np.asarray(getattr(A, "entries", A), dtype=float)
    verdict = check_stable(q, k, rho, scale=spectral_norm(A_arr))
    if not verdict.ok:
        raise ConditionNotMet(
            f"need rho > 0 at s >= {verdict.s_required:.6g}; got rho={rho.value:.3g} at s={rho.s:.6g}")
    sigma, _ = best_k_term_error(entries, k)
    l1, lq, l1i = robust_bounds(q, k, sigma, epsilon, rho.value)
    e = sphere_noise(A_arr.shape[0], epsilon, noise_seed) if epsilon > 0 else 0.0
    y = A_arr @ entries + e
    res = solve_bp(BpProblem(A_arr, y, epsilon), **(solver or {}))
    h = res.x_hat - entries
    err_l1, err_lq = norm(h, 1.0), norm(h, q)
    if res.status != "converged":
        passed = None
    else:
        passed = bool(err_l1 <= l1i + slack and err_lq <= lq + slack)
    return ValidationRecord(q, k, float(epsilon), rho.value, sigma, err_l1, err_lq, float(np.linalg.norm(h)),
                            l1, lq, l1i, slack, res.status, passed)
