"""Estimation of the q-ratio CMSV, the l1-truncated q-width and q-radii.

All three quantities are optimisation problems over nonconvex sets, so
every estimate returned here is the objective of a feasible witness:
``value`` upper-bounds the true minimum for :func:`estimate_cmsv`,
:func:`cmsv_oracle` and :func:`estimate_width`, and lower-bounds the true
supremum for :func:`estimate_radius`.

The local search works with the homogeneous form

    minimize ||A v||_2   over   ||v||_q = a,  s_q(v) <= s,

which is the CMSV for ``a = 1`` and the width ``R_{q,r}`` for ``a = r``,
``s = r ** (-q / (q - 1))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import DomainError, InfeasibleSetError
from .linalg import ResidualBallProjector, kernel_basis, spectral_norm
from .matrix import as_array
from .sparsity import norm, parse_q, q_conjugate, q_ratio_sparsity

# smooth stand-in for q = inf during descent; feasibility carries over
# because s_inf <= s_64
SURROGATE_Q = 64.0
FEAS_TOL = 1e-8


@dataclass
class Budget:
    restarts: int = 64
    iterations: int = 500
    tol: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        if self.restarts < 1 or self.iterations < 1:
            raise DomainError("budget needs at least one restart and one iteration")


@dataclass
class CmsvEstimate:
    q: float
    s: float
    value: float
    witness: np.ndarray
    method: str
    restarts: int
    converged_fraction: float
    extra: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {
            "q": "inf" if math.isinf(self.q) else self.q,
            "s": self.s,
            "value": self.value,
            "witness": [float(v) for v in self.witness],
            "method": self.method,
            "restarts": self.restarts,
            "converged_fraction": self.converged_fraction,
        }


@dataclass
class WidthEstimate:
    q: float
    r: float
    value: float
    witness: np.ndarray
    restarts: int = 0
    converged_fraction: float = 0.0


@dataclass
class RadiusEstimate:
    q: float
    alpha: float
    value: float
    witness: np.ndarray


# ---------------------------------------------------------------------------
# vectorised norm helpers


def _row_norms(V: np.ndarray, q: float) -> np.ndarray:
    a = np.abs(V)
    if math.isinf(q):
        return a.max(axis=1)
    if q == 2:
        return np.sqrt(np.einsum("ij,ij->i", a, a))
    top = a.max(axis=1)
    safe = np.where(top > 0, top, 1.0)
    return top * np.sum((a / safe[:, None]) ** q, axis=1) ** (1.0 / q)


def _qnorm(v: np.ndarray, q: float) -> float:
    return float(_row_norms(v[None, :], q)[0])


def l1_cap(s: float, q: float) -> float:
    """Largest ``||v||_1 / ||v||_q`` allowed by ``s_q(v) <= s``."""
    if math.isinf(q):
        return float(s)
    return float(s) ** ((q - 1.0) / q)


def _threshold_level(x: np.ndarray, cap: float, q: float, lo: float, hi: float) -> float:
    """Root in ``[lo, hi]`` of ``sum(x - t) - cap * ||x - t||_q`` (x sorted, > hi)."""
    k = x.size
    if math.isinf(q):
        # ||x - t||_inf = x[0] - t makes the equation linear
        t = (x.sum() - cap * x[0]) / (k - cap) if k != cap else hi
        return min(max(t, lo), hi)
    if q == 2:
        # (S1 - k t)^2 = cap^2 (S2 - 2 t S1 + k t^2)
        s1, s2 = x.sum(), float(x @ x)
        qa = k * k - cap * cap * k
        qb = -2.0 * k * s1 + 2.0 * cap * cap * s1
        qc = s1 * s1 - cap * cap * s2
        if qa != 0:
            disc = max(qb * qb - 4.0 * qa * qc, 0.0)
            for root in sorted(((-qb - math.sqrt(disc)) / (2 * qa), (-qb + math.sqrt(disc)) / (2 * qa))):
                if lo - 1e-12 * hi <= root <= hi * (1 + 1e-12):
                    return min(max(root, lo), hi)
    # h is concave and decreasing, so Newton from the feasible end moves
    # monotonically toward the root without leaving the feasible side
    t = best = hi
    for _ in range(60):
        d = x - t
        nq = float(_row_norms(d[None, :], q)[0])
        h = d.sum() - cap * nq
        if h > 0:
            # rounding put the Newton step past the root: bisect back
            bad = t
            for _ in range(60):
                mid = 0.5 * (bad + best)
                if not bad < mid < best:
                    break
                d = x - mid
                if d.sum() - cap * float(_row_norms(d[None, :], q)[0]) > 0:
                    bad = mid
                else:
                    best = mid
            break
        best = t
        dh = -k + cap * float(np.sum((d / nq) ** (q - 1.0)))
        if dh >= 0:
            break
        t_new = t - h / dh
        if not lo <= t_new < t or t - t_new <= 1e-15 * x[0]:
            break
        t = t_new
    return best


def retract(w: np.ndarray, q: float, a: float, s: float, q_ratio: float | None = None) -> np.ndarray:
    """Map ``w`` into ``{||v||_q = a, s_r(v) <= s}`` with ``r = q_ratio or q``.

    Rescales onto the sphere and, when the sparsity constraint is violated,
    soft-thresholds by the smallest level that restores it. For ``q = 2``
    this is the Euclidean projection onto the constraint set.
    """
    qr = q if q_ratio is None else q_ratio
    aw = np.abs(w)
    top = aw.max()
    if top == 0:
        raise DomainError("cannot retract the zero vector")
    cap = l1_cap(s, qr)
    if aw.sum() / _qnorm(aw, qr) <= cap:
        return w * (a / _qnorm(w, q))
    srt = np.sort(aw)[::-1]
    # ratio after thresholding at each sorted magnitude below the peak
    V = np.maximum(srt[None, :] - srt[1:, None], 0.0)
    live = V[:, 0] > 0
    ratio = np.full(srt.size - 1, np.inf)
    ratio[live] = V[live].sum(axis=1) / _row_norms(V[live], qr)
    ok = np.nonzero(ratio <= cap)[0]
    if ok.size == 0:
        # nothing but a 1-sparse vector is feasible
        v = np.zeros_like(w)
        i = int(np.argmax(aw))
        v[i] = np.sign(w[i])
        return v * (a / _qnorm(v, q))
    j = int(ok[-1]) + 1  # threshold srt[j] is feasible, srt[j + 1] (or 0) is not
    lo = srt[j + 1] if j + 1 < srt.size else 0.0
    tau = _threshold_level(srt[: j + 1], cap, qr, lo, srt[j])
    v = np.sign(w) * np.maximum(aw - tau, 0.0)
    for _ in range(8):
        if np.abs(v).sum() / _qnorm(v, qr) <= cap:
            break
        tau = tau + 1e-14 * top
        v = np.sign(w) * np.maximum(aw - tau, 0.0)
    return v * (a / _qnorm(v, q))


def _sphere_samples(rng, count: int, n: int, q: float) -> np.ndarray:
    """Points on the unit q-sphere from the cone measure (rows)."""
    if math.isinf(q):
        X = rng.uniform(-1.0, 1.0, size=(count, n))
    else:
        mag = rng.gamma(1.0 / q, 1.0, size=(count, n)) ** (1.0 / q)
        X = mag * rng.choice([-1.0, 1.0], size=(count, n))
    return X / _row_norms(X, q)[:, None]


def _restart_point(rng, index: int, n: int, q: float, s: float) -> np.ndarray:
    """Start for one restart: even indices uniform, odd indices sparse."""
    if index % 2 == 0:
        X = _sphere_samples(rng, 16, n, q)
        ok = np.abs(X).sum(axis=1) <= l1_cap(s, q)
        return X[int(np.argmax(ok))] if ok.any() else X[0]
    size = min(n, max(1, math.ceil(s)))
    v = np.zeros(n)
    idx = rng.choice(n, size=size, replace=False)
    v[idx] = rng.choice([-1.0, 1.0], size=size) * rng.uniform(0.5, 1.0, size=size)
    return v


def _descend(A, gram, q, a, s, v, iterations, tol, t0, q_ratio=None):
    """Projected descent with Barzilai-Borwein trial steps and backtracking."""
    v = retract(v, q, a, s, q_ratio)
    f = float(np.sum((A @ v) ** 2))
    prev_v = prev_g = None
    converged = False
    for _ in range(iterations):
        g = 2.0 * (gram @ v)
        normal = np.abs(v) ** (q - 1.0) * np.sign(v)
        nn = float(normal @ normal)
        if nn > 0:
            g = g - (float(g @ normal) / nn) * normal
        t = t0
        if prev_v is not None:
            dv, dg = v - prev_v, g - prev_g
            curv = abs(float(dv @ dg))
            if curv > 0:
                t = min(max(float(dv @ dv) / curv, 1e-3 * t0), 1e3 * t0)
        while True:
            cand = retract(v - t * g, q, a, s, q_ratio)
            fc = float(np.sum((A @ cand) ** 2))
            if fc < f:
                break
            t *= 0.5
            if t < 1e-12 * t0:
                cand = None
                break
        if cand is None:
            converged = True
            break
        decrease = f - fc
        prev_v, prev_g = v, g
        v, f = cand, fc
        if decrease <= tol * (f + decrease):
            converged = True
            break
    return v, converged


def _project_box_l1(w: np.ndarray, bound: float, budget: float) -> np.ndarray:
    """Projection onto ``{|x_j| <= bound, sum |x_j| <= budget}``."""
    a = np.abs(w)
    clipped = np.minimum(a, bound)
    if clipped.sum() <= budget:
        return np.sign(w) * clipped
    # g(tau) = sum clip(a - tau, 0, bound) is piecewise linear and decreasing
    knots = np.unique(np.concatenate([[0.0], a, np.maximum(a - bound, 0.0)]))
    g = np.clip(a[None, :] - knots[:, None], 0.0, bound).sum(axis=1)
    j = int(np.nonzero(g <= budget)[0][0])
    t0, t1, g0, g1 = knots[j - 1], knots[j], g[j - 1], g[j]
    tau = t1 if g0 == g1 else t0 + (g0 - budget) * (t1 - t0) / (g0 - g1)
    return np.sign(w) * np.clip(a - tau, 0.0, bound)


def _solve_inf_face(A, gram, i, sign, a, s, iterations, t0):
    """Accelerated projected gradient for min ||A v||^2 on one convex face.

    The face fixes ``v_i = sign * a`` and keeps ``|v_j| <= a`` and
    ``||v||_1 <= a s``, so every point has ``||v||_inf = a``, ``s_inf <= s``.
    """
    n = A.shape[1]
    rest = np.arange(n) != i
    step = t0

    def project(w):
        v = np.empty(n)
        v[i] = sign * a
        v[rest] = _project_box_l1(w[rest], a, a * (s - 1.0))
        return v

    v = np.zeros(n)
    v = project(v)
    y, mom = v.copy(), 1.0
    f = float(np.sum((A @ v) ** 2))
    for _ in range(iterations):
        v_new = project(y - step * 2.0 * (gram @ y))
        f_new = float(np.sum((A @ v_new) ** 2))
        if f_new > f:
            # restart momentum
            y, mom = v.copy(), 1.0
            continue
        mom_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * mom * mom))
        y = v_new + ((mom - 1.0) / mom_new) * (v_new - v)
        done = f - f_new <= 1e-15 * max(f, 1e-300) and np.linalg.norm(v_new - v) <= 1e-13 * a
        v, f, mom = v_new, f_new, mom_new
        if done:
            break
    return v


def _search(A: np.ndarray, q: float, a: float, s: float, budget: Budget, extra_starts=()):
    """Multi-start minimisation of ``||A v||`` over ``||v||_q = a``, ``s_q(v) <= s``.

    For ``q = inf`` the descent runs on the 64-sphere with the exact
    ``s_inf`` constraint; each local result is then finished by solving the
    convex face problem that fixes its peak coordinate.
    """
    n = A.shape[1]
    inf = math.isinf(q)
    qs = SURROGATE_Q if inf else q
    q_ratio = math.inf if inf else None
    gram = A.T @ A
    sigma = spectral_norm(A)
    t0 = 0.5 / max(sigma * sigma, 1e-300)
    faces = {}
    best_v, best_val, n_conv = None, math.inf, 0
    starts = [(None, i) for i in range(budget.restarts)] + [(np.asarray(w, float), -1) for w in extra_starts]
    for start, i in starts:
        if start is None:
            rng = np.random.default_rng([budget.seed, i])
            start = _restart_point(rng, i, n, qs, s)
        v, conv = _descend(A, gram, qs, a, s, start * a, budget.iterations, budget.tol, t0, q_ratio)
        n_conv += conv
        if inf:
            v = v * (a / np.abs(v).max())
            if s > 1.0:
                peak = int(np.argmax(np.abs(v)))
                key = (peak, float(np.sign(v[peak])))
                if key not in faces:
                    faces[key] = _solve_inf_face(A, gram, peak, key[1], a, s, budget.iterations * 4, t0)
                face = faces[key]
                if np.linalg.norm(A @ face) < np.linalg.norm(A @ v):
                    v = face
        val = float(np.linalg.norm(A @ v))
        if val < best_val:
            best_v, best_val = v, val
    return best_v, best_val, n_conv / len(starts)


def _check_matrix(A) -> np.ndarray:
    try:
        A = as_array(A)
    except ValueError as exc:
        raise DomainError(str(exc)) from exc
    return A


def _check_q(q) -> float:
    q = parse_q(q)
    if q <= 1:
        raise DomainError(f"q must lie in (1, inf], got {q}")
    return q


def estimate_cmsv(A, q, s: float, budget: Budget | None = None, extra_starts=()) -> CmsvEstimate:
    """Upper estimate of ``rho_{q,s}(A)`` by multi-start projected descent.

    The search runs over ``{||z||_q = 1, ||z||_1 <= s**((q-1)/q)}``; the
    smallest objective over all restarts is returned with its witness.
    Deterministic for a fixed ``budget`` (seed, restarts, iterations).
    """
    A = _check_matrix(A)
    q = _check_q(q)
    budget = budget or Budget()
    n = A.shape[1]
    if not 1.0 <= s <= n:
        raise DomainError(f"s must lie in [1, {n}], got {s}")
    v, val, conv = _search(A, q, 1.0, s, budget, extra_starts)
    return CmsvEstimate(q, float(s), val / _qnorm(v, q), v, "multistart", budget.restarts, conv)


def estimate_width(A, q, r: float, budget: Budget | None = None) -> WidthEstimate:
    """Upper estimate of ``R_{q,r}(A) = min ||A u||_2`` over ``||u||_1 <= 1, ||u||_q = r``."""
    A = _check_matrix(A)
    q = _check_q(q)
    budget = budget or Budget()
    if not r > 0:
        raise DomainError(f"r must be positive, got {r}")
    if r > 1:
        raise InfeasibleSetError(f"no u with ||u||_1 <= 1 has ||u||_q = {r} > 1")
    s = r ** (-q_conjugate(q))
    u, val, conv = _search(A, q, r, s, budget)
    return WidthEstimate(q, float(r), val, u, budget.restarts, conv)


# ---------------------------------------------------------------------------
# brute-force reference


def _polish_finite(A, q, s, z0, maxiter=500):
    """SLSQP refinement of a feasible start in split variables ``z = p - n``."""
    n = A.shape[1]
    gram = A.T @ A
    cap = l1_cap(s, q)

    def split(x):
        return x[:n] - x[n:]

    def obj(x):
        z = split(x)
        return float(z @ gram @ z)

    def obj_grad(x):
        g = 2.0 * (gram @ split(x))
        return np.concatenate([g, -g])

    def sphere(x):
        return float(np.sum(np.abs(split(x)) ** q) - 1.0)

    def sphere_grad(x):
        z = split(x)
        g = q * np.abs(z) ** (q - 1.0) * np.sign(z)
        return np.concatenate([g, -g])

    x0 = np.concatenate([np.maximum(z0, 0.0), np.maximum(-z0, 0.0)])
    res = minimize(
        obj, x0, jac=obj_grad, method="SLSQP",
        bounds=[(0.0, None)] * (2 * n),
        constraints=[
            {"type": "eq", "fun": sphere, "jac": sphere_grad},
            {"type": "ineq", "fun": lambda x: cap - x.sum(), "jac": lambda x: -np.ones(2 * n)},
        ],
        options={"ftol": 1e-15, "maxiter": maxiter},
    )
    z = split(res.x)
    if not np.any(z):
        return z0, False
    return retract(z, q, 1.0, s), bool(res.success)


def _inf_subproblem(A, s, i, maxiter=1000):
    """Exact ``min ||A z||^2`` over ``z_i = 1, |z_j| <= 1, ||z||_1 <= s`` (convex QP)."""
    n = A.shape[1]
    gram = A.T @ A
    bounds = [(0.0, 1.0)] * (2 * n)
    bounds[i] = (1.0, 1.0)
    bounds[n + i] = (0.0, 0.0)
    x0 = np.zeros(2 * n)
    x0[i] = 1.0

    def obj(x):
        z = x[:n] - x[n:]
        return float(z @ gram @ z)

    def obj_grad(x):
        g = 2.0 * (gram @ (x[:n] - x[n:]))
        return np.concatenate([g, -g])

    res = minimize(
        obj, x0, jac=obj_grad, method="SLSQP", bounds=bounds,
        constraints=[{"type": "ineq", "fun": lambda x: s - x.sum(), "jac": lambda x: -np.ones(2 * n)}],
        options={"ftol": 1e-16, "maxiter": maxiter},
    )
    x = np.clip(res.x, 0.0, 1.0)
    z = x[:n] - x[n:]
    z[i] = 1.0
    excess = np.abs(z).sum() - s
    if excess > 0:
        # shave the surplus off the smallest-magnitude entries
        z = retract(z, math.inf, 1.0, s)
    return z, bool(res.success)


def cmsv_inf_exact(A, s: float) -> CmsvEstimate:
    """``rho_{inf,s}(A)`` as the best of N convex quadratic programs.

    By sign symmetry some coordinate of a minimiser equals ``+1 = ||z||_inf``;
    fixing it makes the feasible set a polytope.
    """
    A = _check_matrix(A)
    n = A.shape[1]
    best, best_val, ok = None, math.inf, 0
    for i in range(n):
        z, success = _inf_subproblem(A, s, i)
        ok += success
        val = float(np.linalg.norm(A @ z)) / np.abs(z).max()
        if val < best_val:
            best, best_val = z, val
    return CmsvEstimate(math.inf, float(s), best_val, best / np.abs(best).max(), "oracle", n, ok / n)


def cmsv_oracle(A, q, s: float, n_samples: int = 100_000, seed: int = 0, polish: int = 32,
                warm_starts=(), spread: float = 0.25) -> CmsvEstimate:
    """Brute-force reference value of ``rho_{q,s}(A)`` for small N.

    Samples the unit q-sphere (half full-dimensional, half restricted to
    random coordinate subsets so that near-sparse regions are covered),
    keeps points with ``s_q(z) <= s`` and polishes two tiers of ``polish``
    well-separated low points each, plus any ``warm_starts``, with SLSQP. For ``q = inf`` the value is
    exact (:func:`cmsv_inf_exact`).
    """
    A = _check_matrix(A)
    q = _check_q(q)
    n = A.shape[1]
    if not 1.0 <= s <= n:
        raise DomainError(f"s must lie in [1, {n}], got {s}")
    if math.isinf(q):
        est = cmsv_inf_exact(A, s)
        for w in warm_starts:
            w = retract(np.asarray(w, float), q, 1.0, s)
            val = float(np.linalg.norm(A @ w))
            if val < est.value:
                est.value, est.witness = val, w
        return est

    rng = np.random.default_rng(seed)
    cap = l1_cap(s, q)
    pool_z, pool_v = [], []
    chunk = 20_000
    done = 0
    while done < n_samples:
        count = min(chunk, n_samples - done)
        X = _sphere_samples(rng, count, n, q)
        half = count // 2
        sizes = rng.integers(1, n + 1, size=half)
        mask = rng.random((half, n)).argsort(axis=1) < sizes[:, None]
        X[:half] *= mask
        X[:half] /= _row_norms(X[:half], q)[:, None]
        ratio = np.abs(X).sum(axis=1)  # ||x||_q = 1
        X = X[ratio <= cap]
        if len(X):
            vals = np.linalg.norm(X @ A.T, axis=1)
            keep = np.argsort(vals)[: 16 * polish]
            pool_z.append(X[keep])
            pool_v.append(vals[keep])
        done += count
    if not pool_z:
        raise RuntimeError("oracle found no feasible sample")
    Z = np.concatenate(pool_z)
    V = np.concatenate(pool_v)
    order = np.argsort(V)
    # two tiers of polish starts: widely spread ones cover distinct basins,
    # closely spread ones separate neighbouring minima inside a cluster
    chosen = []
    for radius in (spread, 0.08 * spread):
        tier = []
        for j in order:
            z = Z[j]
            if all(min(np.linalg.norm(z - c), np.linalg.norm(z + c)) > radius for c in tier):
                tier.append(z)
            if len(tier) >= polish:
                break
        chosen += tier
    chosen += [retract(np.asarray(w, float), q, 1.0, s) for w in warm_starts]
    best, best_val = Z[order[0]], float(V[order[0]])
    ok = 0
    for z in chosen:
        zp, success = _polish_finite(A, q, s, z)
        ok += success
        for cand in (z, zp):
            val = float(np.linalg.norm(A @ cand)) / _qnorm(cand, q)
            if val < best_val:
                best, best_val = cand, val
    best = best / _qnorm(best, q)
    return CmsvEstimate(q, float(s), best_val, best, "oracle", len(chosen), ok / len(chosen),
                        extra={"feasible_samples": int(len(Z))})


# ---------------------------------------------------------------------------
# radii


def project_l1_ball(v: np.ndarray, radius: float = 1.0) -> np.ndarray:
    """Euclidean projection onto ``{||x||_1 <= radius}`` (sort-based)."""
    a = np.abs(v)
    if a.sum() <= radius:
        return v.copy()
    mu = np.sort(a)[::-1]
    cs = np.cumsum(mu)
    j = np.arange(1, a.size + 1)
    rho = np.nonzero(mu * j > cs - radius)[0][-1]
    theta = (cs[rho] - radius) / (rho + 1.0)
    return np.sign(v) * np.maximum(a - theta, 0.0)


def _dykstra(v, proj_ball, iters=200, tol=1e-12):
    """Projection onto ``B_1 ∩ {||A z|| <= alpha}`` by Dykstra's algorithm."""
    x = v.copy()
    p = np.zeros_like(v)
    r = np.zeros_like(v)
    for _ in range(iters):
        y = proj_ball(x + p)
        p = x + p - y
        x_new = project_l1_ball(y + r)
        r = y + r - x_new
        if np.linalg.norm(x_new - x) <= tol * max(1.0, np.linalg.norm(x)):
            x = x_new
            break
        x = x_new
    return x


def _qnorm_grad(z, q):
    a = np.abs(z)
    nz = _qnorm(z, q)
    if nz == 0:
        return np.zeros_like(z)
    return np.sign(z) * (a / nz) ** (q - 1.0)


def estimate_radius(A, q, alpha: float, budget: Budget | None = None) -> RadiusEstimate:
    """Lower estimate of ``rad_q({||A z||_2 <= alpha} ∩ B_1^N)``.

    For ``alpha = 0`` the kernel is parametrised by an orthonormal basis
    ``K`` and ``||K c||_q / ||K c||_1`` is maximised over coefficient
    vectors ``c``. For ``alpha > 0`` projected gradient ascent is run with
    Dykstra projections onto the intersection of the l1 ball and the
    residual cylinder.
    """
    A = _check_matrix(A)
    q = _check_q(q)
    budget = budget or Budget()
    if not alpha >= 0 or not math.isfinite(alpha):
        raise DomainError(f"alpha must be finite and non-negative, got {alpha}")
    n = A.shape[1]
    qs = SURROGATE_Q if math.isinf(q) else q
    best, best_val = np.zeros(n), 0.0

    if alpha == 0:
        K = kernel_basis(A)
        d = K.shape[1]
        if d == 0:
            return RadiusEstimate(q, 0.0, 0.0, best)

        def ratio(c):
            z = K @ c
            return _qnorm(z, qs) / np.abs(z).sum()

        for i in range(budget.restarts):
            rng = np.random.default_rng([budget.seed, i])
            c = rng.standard_normal(d)
            c /= np.linalg.norm(c)
            f = ratio(c)
            t = 1.0
            for _ in range(budget.iterations):
                z = K @ c
                l1 = np.abs(z).sum()
                lq = _qnorm(z, qs)
                # gradient of lq / l1 pulled back through K
                gz = _qnorm_grad(z, qs) / l1 - lq * np.sign(z) / l1 ** 2
                g = K.T @ gz
                g -= (g @ c) * c
                if np.linalg.norm(g) == 0:
                    break
                while True:
                    cand = c + t * g
                    cand /= np.linalg.norm(cand)
                    fc = ratio(cand)
                    if fc > f:
                        break
                    t *= 0.5
                    if t < 1e-14:
                        break
                if not fc > f:
                    break
                gain = fc - f
                c, f = cand, fc
                t *= 2.0
                if gain <= budget.tol * f:
                    break
            z = K @ c
            z = z / np.abs(z).sum()
            val = norm(z, q)
            if val > best_val:
                best, best_val = z, val
        return RadiusEstimate(q, 0.0, best_val, best)

    cyl = ResidualBallProjector(A, np.zeros(A.shape[0]), alpha)

    def feasible(z):
        z = _dykstra(z, cyl)
        # exact feasibility: shrink into both sets (scaling keeps the cylinder)
        z = z / max(1.0, np.abs(z).sum())
        res = np.linalg.norm(A @ z)
        if res > alpha:
            z = z * (alpha / res)
        return z

    for i in range(budget.restarts):
        rng = np.random.default_rng([budget.seed, i])
        z = feasible(rng.standard_normal(n) * (1.0 / n))
        f = _qnorm(z, qs)
        t = 1.0
        for _ in range(budget.iterations):
            g = _qnorm_grad(z, qs)
            while True:
                cand = feasible(z + t * g)
                fc = _qnorm(cand, qs)
                if fc > f:
                    break
                t *= 0.5
                if t < 1e-10:
                    break
            if not fc > f:
                break
            gain = fc - f
            z, f = cand, fc
            t *= 2.0
            if gain <= budget.tol * f:
                break
        val = norm(z, q) if np.any(z) else 0.0
        if val > best_val:
            best, best_val = z, val
    return RadiusEstimate(q, float(alpha), best_val, best)


# ---------------------------------------------------------------------------
# inter-q inequalities


def inter_q_exponent(q1: float, q2: float) -> float:
    """Exponent ``q2 (q1 - 1) / (q1 (q2 - 1))`` mapping s to the q2 level."""
    if math.isinf(q1):
        return q2 / (q2 - 1.0)
    return q2 * (q1 - 1.0) / (q1 * (q2 - 1.0))


def lemma2_bounds(A, q1, q2, s: float, estimates=None, **oracle_kwargs) -> dict:
    """Check ``rho_{q1,s} >= rho_{q2,t} >= t**-1 rho_{q1,t}`` with ``t = s**e``.

    ``estimates`` may supply the three values ``(rho_{q1,s}, rho_{q2,t},
    rho_{q1,t})`` as :class:`CmsvEstimate`; otherwise they are computed with
    :func:`cmsv_oracle`, each search warm-started from the previous witness
    (a feasible point of the next problem by monotonicity of ``s_q`` in q).
    """
    A = _check_matrix(A)
    q1, q2 = _check_q(q1), _check_q(q2)
    if not q2 <= q1:
        raise DomainError(f"need 1 < q2 <= q1 <= inf, got q1={q1}, q2={q2}")
    e = inter_q_exponent(q1, q2)
    n = A.shape[1]
    if not 1.0 <= s <= n ** (1.0 / e) * (1 + 1e-12):
        raise DomainError(f"s must lie in [1, {n ** (1.0 / e)}], got {s}")
    t = min(s ** e, float(n))
    if estimates is None:
        r1 = cmsv_oracle(A, q1, s, **oracle_kwargs)
        r2 = r1 if q1 == q2 else cmsv_oracle(A, q2, t, warm_starts=[r1.witness], **oracle_kwargs)
        r3 = r1 if q1 == q2 else cmsv_oracle(A, q1, t, warm_starts=[r2.witness], **oracle_kwargs)
    else:
        r1, r2, r3 = estimates
    lower = r3.value / t
    return {
        "q1": q1,
        "q2": q2,
        "s": float(s),
        "t": t,
        "rho_q1_s": r1.value,
        "rho_q2_t": r2.value,
        "rho_q1_t": r3.value,
        "lower": lower,
        "margin_upper": r1.value - r2.value,
        "margin_lower": r2.value - lower,
    }


def cmsv_profile(A, q, s_grid, **oracle_kwargs) -> list[CmsvEstimate]:
    """Oracle values of ``rho_{q,s}`` along an increasing grid of s.

    Each search is warm-started from the previous witness, which stays
    feasible as s grows, so the returned values are non-increasing.
    """
    grid = [float(s) for s in s_grid]
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise DomainError("s grid must be non-decreasing")
    out, warm = [], []
    for s in grid:
        est = cmsv_oracle(A, q, s, warm_starts=warm, **oracle_kwargs)
        out.append(est)
        warm = [est.witness]
    return out
