import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ozmul.generators import gen_lognormal
from ozmul.mma import MmaConfig
from ozmul.oracle import (
    ExactProduct,
    exact_gemm,
    forward_error,
    hpl_passes,
    hpl_residual,
    max_elementwise_error,
    normwise_gemm_error,
    normwise_passes,
)
from ozmul.scheme import make_plan, multiply

U = 2.0**-53


def _fraction_gemm(A, B):
    m, k = A.shape
    n = B.shape[1]
    return [[sum(Fraction(A[i, p]) * Fraction(B[p, j]) for p in range(k)) for j in range(n)] for i in range(m)]


def test_worked_example_value(worked_example):
    A, B = worked_example
    P = exact_gemm(A, B)
    assert P.fraction(0, 0) == Fraction(-72.20654296875)
    assert P.to_float()[0, 0] == -72.20654296875


def test_zero():
    P = exact_gemm(np.zeros((2, 3)), np.ones((3, 2)))
    assert np.array_equal(P.to_float(), np.zeros((2, 2)))
    assert exact_gemm(np.ones((2, 0)), np.ones((0, 3))).shape == (2, 3)


def test_powers_of_two_match_binary64():
    rng = np.random.default_rng(0)
    A = np.ldexp(1.0, rng.integers(-5, 5, (4, 4))) * rng.choice([-1, 1], (4, 4))
    B = np.ldexp(1.0, rng.integers(-5, 5, (4, 4)))
    assert np.array_equal(exact_gemm(A, B).to_float(), A @ B)


@given(st.integers(0, 2**32))
def test_matches_fractions(seed):
    rng = np.random.default_rng(seed)
    m, k, n = (int(x) for x in rng.integers(1, 5, 3))
    A = rng.standard_normal((m, k)) * np.ldexp(1.0, rng.integers(-60, 60, (m, k)))
    B = rng.standard_normal((k, n)) * np.ldexp(1.0, rng.integers(-60, 60, (k, n)))
    P = exact_gemm(A, B)
    F = _fraction_gemm(A, B)
    for i, j in np.ndindex(P.shape):
        assert P.fraction(i, j) == F[i][j]


@given(st.integers(0, 2**32))
def test_order_independent(seed):
    rng = np.random.default_rng(seed)
    A, B = rng.standard_normal((3, 9)), rng.standard_normal((9, 2))
    p = rng.permutation(9)
    P, Q = exact_gemm(A, B), exact_gemm(A[:, p], B[p])
    assert all(P.fraction(i, j) == Q.fraction(i, j) for i in range(3) for j in range(2))


def test_to_float_rounding_ties_even():
    P = ExactProduct(np.array([[2**53 + 1, 2**53 + 3]], dtype=object), np.array([[0, 0]]))
    assert P.to_float().tolist() == [[2.0**53, 2.0**53 + 4]]
    P = ExactProduct(np.array([[1]], dtype=object), np.array([[-1080]]))
    assert P.to_float()[0, 0] == 0.0
    P = ExactProduct(np.array([[3]], dtype=object), np.array([[-1075]]))
    assert P.to_float()[0, 0] == 2 * 2.0**-1074


def test_alpha_beta():
    rng = np.random.default_rng(3)
    A, B, C = rng.standard_normal((2, 3)), rng.standard_normal((3, 2)), rng.standard_normal((2, 2))
    P = exact_gemm(A, B, alpha=0.75, beta=-3.0, C=C)
    F = _fraction_gemm(A, B)
    for i, j in np.ndindex(2, 2):
        assert P.fraction(i, j) == Fraction(3, 4) * F[i][j] - 3 * Fraction(C[i, j])


def test_forward_error():
    assert forward_error(1.5, 1.5) == 0
    assert forward_error(-72.21875, Fraction(-72.20654296875)) == float(Fraction(0.01220703125) / Fraction(72.20654296875))
    assert forward_error(-72.21875, -72.20654296875) == pytest.approx(1.69057e-4, rel=1e-5)
    assert forward_error(4.0, 2.0) == 1.0
    assert forward_error(1.0, 0) == math.inf
    assert forward_error(0.0, 0) == 0.0


def test_max_elementwise_error():
    rng = np.random.default_rng(4)
    A, B = rng.standard_normal((5, 5)), rng.standard_normal((5, 5))
    P = exact_gemm(A, B)
    assert max_elementwise_error(P.to_float(), P) <= U / (1 - U)
    I = np.eye(4)
    C, _ = multiply(I, I, MmaConfig(), make_plan(4, s_A=1))
    assert max_elementwise_error(C, exact_gemm(I, I)) == 0


def test_more_slices_reduce_error():
    A, B = gen_lognormal(10, 10, 10, 8.0, 1)
    P = exact_gemm(A, B)
    e = [max_elementwise_error(multiply(A, B, MmaConfig(), make_plan(10, s_A=s))[0], P) for s in (2, 8)]
    assert e[1] < e[0]


def test_normwise():
    rng = np.random.default_rng(5)
    A, B = rng.random((64, 64)), rng.random((64, 64))
    P = exact_gemm(A, B)
    assert normwise_gemm_error(P.to_float(), P, A, B) < U
    good = normwise_gemm_error(multiply(A, B, MmaConfig(), make_plan(64, s_A=8))[0], P, A, B)
    bad = normwise_gemm_error(multiply(A, B, MmaConfig(), make_plan(64, s_A=3))[0], P, A, B)
    assert normwise_passes(good) and not normwise_passes(bad)
    assert bad > 1e3 * U
    with pytest.raises(ValueError):
        normwise_gemm_error(np.zeros((1, 1)), exact_gemm(np.zeros((1, 1)), np.zeros((1, 1))), np.zeros((1, 1)), np.zeros((1, 1)))


def test_hpl_residual():
    d = np.arange(1.0, 101.0)
    b = np.ones(100)
    assert hpl_residual(np.diag(d), b / d, b) <= 1
    x = b.copy()
    x[3] += 1
    r = hpl_residual(np.eye(100), x, b)
    assert r > 16 and not hpl_passes(r)
    rng = np.random.default_rng(0)
    A = rng.random((100, 100))
    b = rng.random(100)
    assert hpl_passes(hpl_residual(A, np.linalg.solve(A, b), b))
