"""Right-looking block LU with partial pivoting and a pluggable Schur-update GEMM."""

from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np

from .oracle import exact_gemm
from .slicing import Orientation, min_exact_slices

Gemm = Callable[[np.ndarray, np.ndarray], np.ndarray]


class SingularMatrix(ArithmeticError):
    pass


class LUSolveResult(NamedTuple):
    x: np.ndarray
    s_A_star: int  # max over steps of s* for L21 (rows)
    s_B_star: int  # max over steps of s* for U12 (columns)


def native_gemm(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return X @ Y


def exact_rounded_gemm(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return exact_gemm(X, Y).to_float()


def scheme_gemm(cfg=None, s_A=8, s_B=None, **plan_kw) -> Gemm:
    """A GEMM callable that runs the sliced integer scheme with a fixed slice count."""
    from .mma import MmaConfig
    from .scheme import make_plan, multiply

    cfg = cfg or MmaConfig()
    cache = {}

    def gemm(X, Y):
        k = max(X.shape[1], 1)
        if k not in cache:
            cache[k] = make_plan(k, cfg, s_A, s_B, **plan_kw)
        return multiply(X, Y, cfg, cache[k])[0]

    return gemm


def _panel_lu(P: np.ndarray, perm: np.ndarray, A: np.ndarray, j: int):
    """Unblocked LU with partial pivoting of the tall panel ``A[j:, j:j+b]``, in place."""
    nrows, b = P.shape
    for c in range(b):
        p = c + int(np.argmax(np.abs(P[c:, c])))
        if P[p, c] == 0:
            raise SingularMatrix(f"zero pivot in column {j + c}")
        if p != c:
            # Swap whole rows of the working matrix so both L and the trailing part follow.
            A[[j + c, j + p], :] = A[[j + p, j + c], :]
            perm[[j + c, j + p]] = perm[[j + p, j + c]]
        P[c + 1 :, c] /= P[c, c]
        P[c + 1 :, c + 1 :] -= np.outer(P[c + 1 :, c], P[c, c + 1 :])


def _unit_lower_solve(L: np.ndarray, B: np.ndarray) -> np.ndarray:
    X = B.copy()
    for i in range(1, L.shape[0]):
        X[i] -= L[i, :i] @ X[:i]
    return X


def _upper_solve(U: np.ndarray, y: np.ndarray) -> np.ndarray:
    n = U.shape[0]
    x = y.copy()
    for i in range(n - 1, -1, -1):
        x[i] = (x[i] - U[i, i + 1 :] @ x[i + 1 :]) / U[i, i]
    return x


def block_lu_solve(
    A,
    bvec,
    block: int = 10,
    gemm: Gemm = native_gemm,
    record_slices: bool = True,
    t: int = 7,
) -> LUSolveResult:
    """Solve ``A x = b`` by block LU; the Schur update ``A22 - L21 U12`` goes through ``gemm``.

    Panels, triangular solves and substitutions run in plain binary64.
    With ``record_slices`` the largest ``s*`` needed to slice ``L21`` by
    rows and ``U12`` by columns (width ``t``) is returned as well.
    """
    A = np.array(A, dtype=np.float64)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"A must be square, got {A.shape}")
    if block < 1:
        raise ValueError("block size must be positive")
    b = np.asarray(bvec, dtype=np.float64).reshape(n).copy()
    perm = np.arange(n)
    sA = sB = 0
    for j in range(0, n, block):
        e = min(j + block, n)
        _panel_lu(A[j:, j:e], perm, A, j)
        if e == n:
            break
        L11 = A[j:e, j:e]
        A[j:e, e:] = _unit_lower_solve(np.tril(L11, -1), A[j:e, e:])
        # Negative zeros are not valid GEMM input; +0.0 canonicalises them.
        L21 = A[e:, j:e] + 0.0
        U12 = A[j:e, e:] + 0.0
        if record_slices:
            sA = max(sA, min_exact_slices(L21, t, Orientation.ROWS))
            sB = max(sB, min_exact_slices(U12, t, Orientation.COLUMNS))
        A[e:, e:] -= gemm(L21, U12)

    y = _unit_lower_solve(np.tril(A, -1), b[perm].reshape(n, 1)).reshape(n)
    x = _upper_solve(np.triu(A), y)
    return LUSolveResult(x, sA, sB)
