"""Dense linear-algebra helpers shared by the solvers and estimators."""

from __future__ import annotations

import numpy as np
from scipy.linalg import null_space


def spectral_norm(A, iters: int = 100, seed: int = 0) -> float:
    """Largest singular value of ``A`` by power iteration on ``A^T A``."""
    A = np.asarray(A, dtype=float)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(iters):
        w = A.T @ (A @ v)
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        v = w / nw
        sigma = np.sqrt(nw)
    # Rayleigh quotient is a lower bound; use it at the last iterate
    return float(max(sigma, np.linalg.norm(A @ v)))


def kernel_basis(A, rcond: float | None = None) -> np.ndarray:
    """Orthonormal basis of Ker A as columns (shape N x d)."""
    return null_space(np.asarray(A, dtype=float), rcond=rcond)


class ResidualBallProjector:
    """Euclidean projection onto ``{z : ||A z - y||_2 <= eps}``.

    ``eps = 0`` gives the affine set ``A z = y`` (when consistent). The
    projection is computed in the SVD basis of ``A``; for ``eps > 0`` the
    Lagrange multiplier is found by safeguarded Newton iterations on the
    monotone secular equation.
    """

    def __init__(self, A, y, eps: float = 0.0, rcond: float = 1e-12):
        A = np.asarray(A, dtype=float)
        y = np.asarray(y, dtype=float)
        U, s, Vt = np.linalg.svd(A, full_matrices=False)
        keep = s > rcond * (s[0] if s.size else 0.0)
        self.A = A
        self.y = y
        self.eps = float(eps)
        self.U = U[:, keep]
        self.s = s[keep]
        self.Vt = Vt[keep]
        self.b = self.U.T @ y
        self.y_perp = float(np.linalg.norm(y - self.U @ self.b))

    @property
    def feasible(self) -> bool:
        return self.y_perp <= self.eps * (1 + 1e-12) + 1e-14 * max(1.0, np.linalg.norm(self.y))

    def residual(self, z) -> float:
        return float(np.linalg.norm(self.A @ z - self.y))

    def __call__(self, v) -> np.ndarray:
        c = self.Vt @ v
        d = self.s * c - self.b
        if self.eps == 0.0:
            return v - self.Vt.T @ (d / self.s)
        slack2 = self.eps ** 2 - self.y_perp ** 2
        if slack2 <= 0:
            return v - self.Vt.T @ (d / self.s)
        if np.dot(d, d) <= slack2:
            return v
        s2 = self.s ** 2

        def phi(mu):
            w = d / (1.0 + mu * s2)
            return np.dot(w, w) - slack2, -2.0 * np.dot(w * w, s2 / (1.0 + mu * s2))

        lo, hi = 0.0, 1.0
        while phi(hi)[0] > 0:
            lo, hi = hi, hi * 4.0
        mu = hi
        for _ in range(100):
            f, df = phi(mu)
            if f > 0:
                lo = mu
            else:
                hi = mu
            step = mu - f / df
            mu = step if lo < step < hi else 0.5 * (lo + hi)
            if hi - lo <= 1e-15 * hi:
                break
        # hi keeps the iterate on the feasible side
        mu = hi if phi(mu)[0] > 0 else mu
        factor = 1.0 / (1.0 + mu * s2)
        return v - self.Vt.T @ (c - (c + mu * self.s * self.b) * factor)
