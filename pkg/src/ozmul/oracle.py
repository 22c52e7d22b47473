"""Exact reference products over dyadic rationals, and the accuracy metrics.

Every binary64 value is an integer times a power of two, so products and
sums of them are too. :func:`exact_gemm` scales each row of ``A`` and
column of ``B`` to integers and multiplies with Python integers; entry
``(i, j)`` of the result is ``sig[i, j] * 2**exp[i, j]`` exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .fpcore import BINARY64, check_matrix, round_dyadic


def _integer_rows(X: np.ndarray, axis: int):
    """Integer matrix ``N`` and per-block exponents ``e`` with ``X = N * 2**e`` exactly."""
    f, E = np.frexp(X)
    sig = np.ldexp(f, 53).astype(np.int64)  # exact: |f| < 1 has 53 bits
    E = E.astype(np.int64) - 53
    nz = X != 0
    big = np.iinfo(np.int64).max
    low = np.where(nz, E, big).min(axis=axis, initial=big)
    low = np.where(low == big, 0, low)
    lowb = np.expand_dims(low, axis)
    shift = np.where(nz, E - lowb, 0)
    N = np.left_shift(sig.astype(object), shift.astype(object))
    return N, low


@dataclass(frozen=True)
class ExactProduct:
    """Entry ``(i, j)`` equals ``sig[i, j] * 2**exp[i, j]`` with no rounding."""

    sig: np.ndarray  # object array of Python ints
    exp: np.ndarray  # int64 array, same shape

    @property
    def shape(self) -> tuple:
        return self.sig.shape

    def fraction(self, i, j) -> Fraction:
        e = int(self.exp[i, j])
        n = int(self.sig[i, j])
        return Fraction(n * 2**e) if e >= 0 else Fraction(n, 2**-e)

    def to_float(self) -> np.ndarray:
        """Every entry rounded once to binary64 (nearest, ties to even)."""
        out = np.empty(self.shape)
        for idx in np.ndindex(self.shape):
            out[idx] = round_dyadic(int(self.sig[idx]), int(self.exp[idx]))
        return out

    def __add__(self, other: "ExactProduct") -> "ExactProduct":
        e = np.minimum(self.exp, other.exp)
        a = _shift_up(self.sig, self.exp - e)
        b = _shift_up(other.sig, other.exp - e)
        return ExactProduct(a + b, e)

    def scale(self, x: float) -> "ExactProduct":
        """Exact product with a binary64 scalar."""
        num, den = float(x).as_integer_ratio()
        return ExactProduct(self.sig * num, self.exp - (den.bit_length() - 1))

    @classmethod
    def from_float(cls, X) -> "ExactProduct":
        X = np.asarray(X, dtype=np.float64)
        f, E = np.frexp(X)
        sig = np.ldexp(f, 53).astype(np.int64).astype(object)
        return cls(sig, E.astype(np.int64) - 53)


def _shift_up(sig: np.ndarray, by: np.ndarray) -> np.ndarray:
    return np.left_shift(sig.astype(object), by.astype(object))


def exact_gemm(A, B, alpha: float = 1.0, beta: float = 0.0, C=None) -> ExactProduct:
    """Exact ``alpha * A @ B + beta * C`` for binary64 inputs."""
    A = check_matrix(A, "A")
    B = check_matrix(B, "B")
    if A.shape[1] != B.shape[0]:
        raise ValueError(f"shape mismatch: {A.shape} @ {B.shape}")
    m, n = A.shape[0], B.shape[1]
    if A.shape[1] == 0:
        P = ExactProduct(np.zeros((m, n), dtype=np.int64).astype(object), np.zeros((m, n), dtype=np.int64))
    else:
        NA, ea = _integer_rows(A, 1)
        NB, eb = _integer_rows(B, 0)
        P = ExactProduct(NA.dot(NB), ea[:, None] + eb[None, :])
    if alpha != 1.0:
        P = P.scale(alpha)
    if beta != 0.0 and C is not None:
        P = P + ExactProduct.from_float(C).scale(beta)
    return P


def _as_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, float):
        return Fraction(*c.as_integer_ratio())
    return Fraction(c)


def forward_error(chat: float, c_exact) -> float:
    """``|chat - c| / |c|`` evaluated exactly, then rounded; ``inf`` if ``c = 0 != chat``."""
    c = _as_fraction(c_exact)
    d = abs(_as_fraction(float(chat)) - c)
    if c == 0:
        return 0.0 if d == 0 else math.inf
    return float(d / abs(c))


def max_elementwise_error(Chat, C_exact: ExactProduct) -> float:
    """Largest entrywise relative error of ``Chat`` against the exact product."""
    Chat = np.asarray(Chat, dtype=np.float64)
    if Chat.shape != C_exact.shape:
        raise ValueError(f"shape mismatch: {Chat.shape} vs {C_exact.shape}")
    worst = 0.0
    for i, j in np.ndindex(Chat.shape):
        worst = max(worst, forward_error(float(Chat[i, j]), C_exact.fraction(i, j)))
    return worst


def exact_difference(Chat, C_exact: ExactProduct) -> np.ndarray:
    """``Chat - C`` with every entry rounded once to binary64."""
    Chat = np.asarray(Chat, dtype=np.float64)
    D = ExactProduct.from_float(Chat) + C_exact.scale(-1.0)
    return D.to_float()


def abs_error(Chat, C_exact: ExactProduct) -> np.ndarray:
    return np.abs(exact_difference(Chat, C_exact))


def normwise_gemm_error(Dhat, D_exact: ExactProduct, A, B, C=None, a: float = 1.0, b: float = 0.0) -> float:
    """``||Dhat - D||_F / (|a| sqrt(k + 2) ||A||_F ||B||_F + 2 |b| ||C||_F)``."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    k = A.shape[1]
    normC = np.linalg.norm(C) if C is not None else 0.0
    den = abs(a) * math.sqrt(k + 2) * np.linalg.norm(A) * np.linalg.norm(B) + 2 * abs(b) * normC
    if den == 0:
        raise ValueError("denominator of the normwise error is zero")
    return float(np.linalg.norm(exact_difference(Dhat, D_exact)) / den)


def normwise_passes(value: float, u: float = BINARY64.u) -> bool:
    return value < u


HPL_THRESHOLD = 16.0


def hpl_residual(A, xhat, bvec, u: float = BINARY64.u) -> float:
    """``||A xhat - b||_inf / (2u (||A||_inf ||xhat||_inf + ||b||_inf) n)``.

    The residual is computed exactly and rounded once per entry.
    """
    A = check_matrix(A, "A")
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"A must be square, got {A.shape}")
    x = np.asarray(xhat, dtype=np.float64).reshape(n, 1) + 0.0
    b = np.asarray(bvec, dtype=np.float64).reshape(n, 1) + 0.0
    r = exact_gemm(A, x, beta=-1.0, C=b).to_float()
    num = np.max(np.abs(r))
    den = 2 * u * (np.max(np.sum(np.abs(A), axis=1)) * np.max(np.abs(x)) + np.max(np.abs(b))) * n
    if den == 0:
        return 0.0 if num == 0 else math.inf
    return float(num / den)


def hpl_passes(value: float) -> bool:
    return value <= HPL_THRESHOLD
