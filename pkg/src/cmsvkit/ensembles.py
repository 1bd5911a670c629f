"""Random measurement ensembles, test signals and measurement-count thresholds."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.fft import dct
from scipy.linalg import hadamard

from .errors import DomainError, ThresholdUnreachable
from .matrix import MeasurementMatrix
from .sparsity import Signal, parse_q, q_conjugate

KINDS = ("gaussian", "rademacher", "partial_hadamard", "partial_dct")
NORMALIZATIONS = ("unit_row_l2", "one_over_sqrt_m")
MEASUREMENT_CAP = 10**9


@dataclass(frozen=True)
class EnsembleSpec:
    kind: str
    m: int
    N: int
    seed: int = 0
    normalization: str = "unit_row_l2"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown ensemble {self.kind!r}; choose from {', '.join(KINDS)}")
        if self.normalization not in NORMALIZATIONS:
            raise DomainError(f"unknown normalization {self.normalization!r}")
        if self.m < 1 or self.N < 1:
            raise DomainError("m and N must be positive")
        if self.seed < 0:
            raise DomainError("seed must be unsigned")
        if self.kind == "partial_hadamard" and self.N & (self.N - 1):
            raise DomainError(f"partial_hadamard needs N a power of 2, got {self.N}")


def hadamard_system(N: int) -> np.ndarray:
    """Sylvester Hadamard matrix scaled by 1/sqrt(N): flat rows of unit norm."""
    if N < 1 or N & (N - 1):
        raise DomainError(f"Hadamard systems need N a power of 2, got {N}")
    return hadamard(N).astype(float) / math.sqrt(N)


def dct_system(N: int) -> np.ndarray:
    """Orthonormal DCT-II matrix scaled by 1/sqrt(2).

    The orthonormal rows peak at sqrt(2/N); the extra factor brings every
    row under the flatness bound 1/sqrt(N) and gives all rows the common
    l2 norm 1/sqrt(2).
    """
    return dct(np.eye(N), type=2, norm="ortho", axis=0) / math.sqrt(2.0)


def parent_system(kind: str, N: int) -> tuple[np.ndarray, float]:
    """Orthogonal parent matrix (rows phi_i) and its common row norm M."""
    if kind == "partial_hadamard":
        return hadamard_system(N), 1.0
    if kind == "partial_dct":
        return dct_system(N), 1.0 / math.sqrt(2.0)
    raise DomainError(f"{kind!r} has no orthogonal parent system")


def generate(spec: EnsembleSpec) -> MeasurementMatrix:
    """Draw an ``m x N`` matrix; identical specs give bit-identical output.

    Structured ensembles sample rows of the parent system uniformly *with*
    replacement, so repeated rows can occur.
    """
    rng = np.random.default_rng(spec.seed)
    m, N = spec.m, spec.N
    row_l2 = None
    if spec.kind in ("gaussian", "rademacher"):
        if spec.kind == "gaussian":
            A = rng.standard_normal((m, N))
        else:
            A = rng.choice([-1.0, 1.0], size=(m, N))
        if spec.normalization == "unit_row_l2":
            A /= np.linalg.norm(A, axis=1, keepdims=True)
            row_l2 = 1.0
        else:
            A /= math.sqrt(m)
    else:
        parent, row_l2 = parent_system(spec.kind, N)
        rows = rng.integers(0, N, size=m)
        A = parent[rows]
    return MeasurementMatrix(A, ensemble_tag=spec.kind, seed=spec.seed, row_l2=row_l2,
                             normalization=spec.normalization)


def sparse_signal(N: int, k: int, seed: int = 0, law: str = "unit", p: float = 1.0) -> Signal:
    """Random test signal.

    ``law`` is ``"unit"`` (+-1 on a random k-support), ``"gaussian"``
    (standard normal values on the support) or ``"flat-decay"``: all N
    entries nonzero with sorted magnitudes ``i**-p`` placed in random order,
    so the signal is compressible rather than exactly sparse.
    """
    if not 1 <= k <= N:
        raise DomainError(f"k must lie in [1, {N}], got {k}")
    rng = np.random.default_rng(seed)
    x = np.zeros(N)
    if law in ("flat-decay", "flat_decay"):
        mags = np.arange(1, N + 1, dtype=float) ** (-p)
        perm = rng.permutation(N)
        x[perm] = mags * rng.choice([-1.0, 1.0], size=N)
        return Signal(x, None, k, law="flat-decay", seed=seed, meta={"p": p})
    support = np.sort(rng.choice(N, size=k, replace=False))
    signs = rng.choice([-1.0, 1.0], size=k)
    if law == "unit":
        x[support] = signs
    elif law == "gaussian":
        x[support] = rng.standard_normal(k)
    else:
        raise DomainError(f"unknown magnitude law {law!r}")
    return Signal(x, support, k, law=law, seed=seed)


@dataclass(frozen=True)
class ComplexityQuery:
    delta: float
    k: int
    N: int
    M: float
    C: float
    q: float

    def __post_init__(self):
        q = parse_q(self.q)
        object.__setattr__(self, "q", q)
        if q <= 1:
            raise DomainError(f"q must lie in (1, inf], got {q}")
        if not self.delta >= 1:
            raise DomainError("delta must be at least 1")
        if self.k < 1 or self.N < 1 or self.k > self.N:
            raise DomainError("need 1 <= k <= N")
        if not (self.M > 0 and self.C >= 0):
            raise DomainError("M must be positive and C non-negative")

    @property
    def branch(self) -> str:
        return "q<2" if self.q < 2 else "q>=2"

    def coefficient(self) -> float:
        """The factor K in the threshold ``m >= K (log m)**3``."""
        base = 9.0 * self.C ** 2 * math.log(self.N) / self.M ** 2
        if self.q < 2:
            return base * self.delta ** q_conjugate(self.q) * self.k
        k_exp = 2.0 if math.isinf(self.q) else 2.0 * (self.q - 1.0) / self.q
        return base * self.delta ** 2 * self.k ** k_exp

    def rhs(self, m: int) -> float:
        return self.coefficient() * math.log(m) ** 3


def min_measurements(query: ComplexityQuery, cap: int = MEASUREMENT_CAP) -> int:
    """Smallest integer ``m >= 2`` with ``m >= K (log m)**3`` (natural log).

    Iterates ``m <- ceil(K (log m)**3)`` from ``m = 2``; the sequence is
    non-decreasing and stops at the least solution. Raises
    :class:`ThresholdUnreachable` once the iterate passes ``cap``.
    """
    m = 2
    while True:
        nxt = math.ceil(query.rhs(m))
        if nxt <= m:
            return m
        if nxt > cap:
            raise ThresholdUnreachable(f"threshold exceeds {cap} measurements")
        m = nxt
