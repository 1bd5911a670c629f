"""Norms, q-ratio sparsity and best k-term approximation.

Exponents are plain floats; ``math.inf`` is the infinity exponent and is
handled by explicit branches so that ``q / (q - 1)`` never overflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError


def parse_q(value) -> float:
    """Parse an exponent given as a number or as ``"inf"``/``"infinity"``."""
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("inf", "infinity", "+inf"):
            return math.inf
        value = float(text)
    q = float(value)
    if math.isnan(q) or q < 0:
        raise DomainError(f"exponent must be a non-negative number, got {value!r}")
    return q


def format_q(q: float) -> str:
    return "inf" if math.isinf(q) else repr(float(q))


def q_conjugate(q: float) -> float:
    """Return q/(q-1), with the value 1 at q = inf."""
    if math.isinf(q):
        return 1.0
    if q <= 1:
        raise DomainError(f"q/(q-1) needs q > 1, got {q}")
    return q / (q - 1.0)


def k_power(k: float, q: float) -> float:
    """Return k**(1 - 1/q); equals k at q = inf."""
    if math.isinf(q):
        return float(k)
    return float(k) ** (1.0 - 1.0 / q)


def _as_vector(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.size == 0:
        raise DomainError("expected a non-empty 1-d vector")
    return z


def norm(z, q: float) -> float:
    """l_q norm with the conventions q=0 (nonzero count) and q=inf (max)."""
    z = _as_vector(z)
    q = parse_q(q)
    a = np.abs(z)
    if q == 0:
        return float(np.count_nonzero(a))
    if math.isinf(q):
        return float(a.max())
    if q == 1:
        return float(a.sum())
    top = a.max()
    if top == 0:
        return 0.0
    # rescale by the peak so powers neither underflow nor overflow
    a = a / top
    if q == 2:
        return float(top * np.sqrt(np.dot(a, a)))
    return float(top * np.sum(a ** q) ** (1.0 / q))


def entropy(p) -> float:
    """Shannon entropy in nats, with 0 log 0 = 0."""
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


@dataclass(frozen=True)
class SparsityValue:
    q: float
    value: float


def q_ratio_sparsity(z, q: float) -> float:
    """Effective sparsity (||z||_1 / ||z||_q) ** (q / (q - 1)).

    The exponents 0, 1 and inf are taken as limits: the nonzero count,
    ``exp`` of the entropy of ``|z| / ||z||_1``, and ``||z||_1 / ||z||_inf``.
    The value is scale invariant and lies in ``[1, len(z)]``.
    """
    z = _as_vector(z)
    q = parse_q(q)
    a = np.abs(z)
    top = a.max()
    if top == 0:
        raise DomainError("q-ratio sparsity is undefined at the origin")
    a = a / top
    l1 = a.sum()
    if q == 0:
        return float(np.count_nonzero(a))
    if q == 1:
        return float(math.exp(entropy(a / l1)))
    if math.isinf(q):
        return float(l1)
    return float((l1 / norm(a, q)) ** (q / (q - 1.0)))


def sparsity_value(z, q: float) -> SparsityValue:
    q = parse_q(q)
    return SparsityValue(q=q, value=q_ratio_sparsity(z, q))


@dataclass
class Signal:
    """Dense signal with optional ground-truth sparsity metadata."""

    entries: np.ndarray
    true_support: np.ndarray | None = None
    k: int | None = None
    law: str = "unspecified"
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.entries = _as_vector(self.entries)
        n = self.entries.size
        if self.true_support is not None:
            self.true_support = np.asarray(self.true_support, dtype=int)
            off = np.ones(n, dtype=bool)
            off[self.true_support] = False
            if np.any(self.entries[off] != 0):
                raise DomainError("entries must vanish off the true support")
        if self.k is not None and not 1 <= self.k <= n:
            raise DomainError(f"k must lie in [1, {n}], got {self.k}")

    @property
    def N(self) -> int:
        return self.entries.size


def best_k_term_error(x, k: int) -> tuple[float, np.ndarray]:
    """l1 error of the best k-term approximation and its support.

    Ties in magnitude go to the lowest index. Returns ``(sigma, S)`` with
    ``S`` sorted ascending.
    """
    if isinstance(x, Signal):
        x = x.entries
    x = _as_vector(x)
    n = x.size
    if not 1 <= k <= n:
        raise DomainError(f"k must lie in [1, {n}], got {k}")
    a = np.abs(x)
    # stable sort on -|x| keeps lower indices first among equal magnitudes
    order = np.argsort(-a, kind="stable")
    support = np.sort(order[:k])
    sigma = float(np.sum(a[order[k:]]))
    return sigma, support
