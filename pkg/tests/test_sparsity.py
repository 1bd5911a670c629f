from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cmsvkit.errors import DomainError
from cmsvkit.sparsity import (Signal, best_k_term_error, entropy, k_power, norm, parse_q, q_conjugate,
                              q_ratio_sparsity, sparsity_value)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
vectors = st.integers(1, 12).flatmap(lambda n: arrays(float, n, elements=finite))
nonzero = vectors.filter(lambda z: np.abs(z).max() > 1e-6)
qs = st.sampled_from([0.5, 1.0, 1.5, 2.0, 3.0, 10.0, math.inf])


def test_norm_examples():
    assert norm([3, 4], 2) == 5
    assert norm([3, -4], math.inf) == 4
    assert norm([1, 0, 2, 0], 0) == 2


def test_norm_rejects_empty():
    with pytest.raises(DomainError):
        norm([], 2)


def test_sparsity_examples():
    assert q_ratio_sparsity([0, 0, 1, 0], 2) == pytest.approx(1.0)
    for q in (0, 0.5, 1, 1.5, 2, 4, math.inf):
        assert q_ratio_sparsity([0, -3, 0], q) == pytest.approx(1.0, abs=1e-12)
    assert q_ratio_sparsity([1, 1, 1, 1], 2) == pytest.approx(4.0)
    assert q_ratio_sparsity([1, 1, 0, 0], 1) == pytest.approx(2.0)
    assert q_ratio_sparsity([3, 4], 2) == pytest.approx(1.96)


def test_sparsity_at_zero_is_undefined():
    with pytest.raises(DomainError):
        q_ratio_sparsity([0.0, 0.0], 2)


def test_sparsity_value_wraps():
    sv = sparsity_value([1, 1, 0], "inf")
    assert sv.q == math.inf and sv.value == pytest.approx(2.0)


def test_q_parsing_and_conjugate():
    assert parse_q("inf") == math.inf
    assert parse_q("2.5") == 2.5
    assert q_conjugate(math.inf) == 1.0
    assert q_conjugate(2) == 2.0
    assert q_conjugate(1.5) == pytest.approx(3.0)
    assert k_power(5, math.inf) == 5
    with pytest.raises(DomainError):
        q_conjugate(1.0)


def test_conjugate_strictly_decreasing():
    grid = [1.01, 1.2, 1.5, 2, 3, 10, 100, math.inf]
    vals = [q_conjugate(q) for q in grid]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_entropy_convention():
    assert entropy([0.5, 0.5, 0.0]) == pytest.approx(math.log(2))


@settings(max_examples=300, deadline=None)
@given(nonzero, qs, st.floats(1e-3, 1e3).flatmap(lambda c: st.sampled_from([c, -c])))
def test_scale_invariance(z, q, c):
    assert q_ratio_sparsity(c * z, q) == pytest.approx(q_ratio_sparsity(z, q), rel=1e-12)


@settings(max_examples=300, deadline=None)
@given(nonzero, qs)
def test_range(z, q):
    v = q_ratio_sparsity(z, q)
    assert 1 - 1e-12 <= v <= z.size * (1 + 1e-12)


def test_limits():
    # log s_q - log s_inf is at most log(N) / (q - 1) in magnitude, so a
    # 1e-3 match needs q of order 1e4 once N reaches ~20
    rng = np.random.default_rng(0)
    for _ in range(50):
        z = rng.standard_normal(rng.integers(2, 20))
        s_inf = q_ratio_sparsity(z, math.inf)
        gap = abs(math.log(q_ratio_sparsity(z, 1e3) / s_inf))
        assert gap <= math.log(z.size) / 999
        assert q_ratio_sparsity(z, 1e4) == pytest.approx(s_inf, rel=1e-3)
        for q in (1 - 1e-4, 1 + 1e-4):
            assert q_ratio_sparsity(z, q) == pytest.approx(q_ratio_sparsity(z, 1), rel=1e-3)


@settings(max_examples=200, deadline=None)
@given(vectors)
def test_norm_chain(z):
    grid = [1, 1.5, 2, 3, 7, math.inf]
    vals = [norm(z, q) for q in grid]
    for a, b in zip(vals, vals[1:]):
        assert b <= a * (1 + 1e-12) + 1e-300


def test_best_k_term_examples():
    sigma, S = best_k_term_error([5, -3, 1], 1)
    assert sigma == 4 and list(S) == [0]
    assert best_k_term_error([5, -3, 1], 3)[0] == 0
    sigma, S = best_k_term_error([2, 2, 1, 1], 2)
    assert sigma == 2 and list(S) == [0, 1]
    sigma, S = best_k_term_error([1, 2, 2, 2], 2)
    assert list(S) == [1, 2]


def test_best_k_term_range():
    with pytest.raises(DomainError):
        best_k_term_error([1, 2], 3)
    with pytest.raises(DomainError):
        best_k_term_error([1, 2], 0)


@settings(max_examples=200, deadline=None)
@given(vectors)
def test_best_k_term_monotone(x):
    errs = [best_k_term_error(x, k)[0] for k in range(1, x.size + 1)]
    assert all(b <= a for a, b in zip(errs, errs[1:]))
    nnz = int(np.count_nonzero(x))
    if nnz >= 1:
        assert best_k_term_error(x, nnz)[0] == 0


def test_signal_validation():
    s = Signal([0, 1.5, 0], true_support=[1], k=1)
    assert s.N == 3
    with pytest.raises(DomainError):
        Signal([1.0, 1.0], true_support=[0])
    with pytest.raises(DomainError):
        Signal([1.0, 1.0], k=3)
