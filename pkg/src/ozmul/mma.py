"""Bit-exact model of an integer matrix multiply-accumulate unit.

The unit takes inputs in ``I_{t_in}`` and accumulates in ``I_{t_acc}``.
Products are computed exactly on the host; every accumulator value is checked
against the accumulator range so that overflow is reported, never wrapped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fpcore import IntFormat, ceil_log2

# Integers below this bound are exact in float64, so BLAS can be used.
_FLOAT_EXACT = 2**53


class CapacityError(ValueError):
    """The requested inner dimension or slice width exceeds what the unit supports."""


class AccumulatorOverflow(ArithmeticError):
    def __init__(self, i: int, j: int, value: int, t_acc: int):
        self.index = (i, j)
        self.value = value
        super().__init__(
            f"accumulator overflow at ({i}, {j}): {value} outside I_{t_acc} "
            f"[{-(1 << t_acc)}, {(1 << t_acc) - 1}]"
        )


@dataclass(frozen=True)
class MmaConfig:
    """Input width ``t_in`` and accumulator width ``t_acc`` (INT8/INT32 by default)."""

    t_in: int = 7
    t_acc: int = 31

    def __post_init__(self):
        if self.t_in < 1:
            raise ValueError(f"t_in must be at least 1, got {self.t_in}")
        if self.t_acc - 2 * self.t_in + 1 < 0:
            raise ValueError(
                f"accumulator I_{self.t_acc} cannot hold one product of I_{self.t_in} values"
            )

    @property
    def input_format(self) -> IntFormat:
        return IntFormat(self.t_in)

    @property
    def acc_format(self) -> IntFormat:
        return IntFormat(self.t_acc)


def optimal_slice_width(cfg: MmaConfig, k: int) -> int:
    """Widest slice ``t`` such that ``k`` products fit the accumulator."""
    t = min(cfg.t_in, (cfg.t_acc - ceil_log2(k)) // 2)
    if t < 1:
        raise CapacityError(
            f"k = {k} is too large for I_{cfg.t_acc} (needs k <= 2**{cfg.t_acc - 3})"
        )
    return t


def optimal_slice_width_diagonal(cfg: MmaConfig, k: int, s: int) -> int:
    """Slice width leaving room for ``s - 1`` extra chained products per element."""
    if s < 1:
        raise ValueError(f"s must be at least 1, got {s}")
    return optimal_slice_width(cfg, k + s - 1)


def max_k(cfg: MmaConfig) -> int:
    """Largest power-of-two inner dimension supported with full-width ``I_{t_in}`` inputs.

    A product of two ``I_{t'}`` values can reach ``2**(2t')``, which needs
    ``2(t' + 1) - 1`` bits, so ``2**K`` of them fit ``I_T`` for
    ``K = T + 1 - 2(t' + 1) = T - 2t' - 1``.
    """
    K = cfg.t_acc - 2 * cfg.t_in - 1
    if K < 0:
        raise CapacityError(f"no inner dimension fits: T - 2t' - 1 = {K}")
    return 1 << K


def _max_abs(X) -> int:
    return int(np.max(np.abs(X))) if X.size else 0


def integer_gemm(X, Y, cfg: MmaConfig = MmaConfig(), C=None) -> np.ndarray:
    """Exact ``X @ Y + C`` over integers, with range checks on inputs and accumulators.

    Accumulation runs over the inner index in ascending order starting from
    ``C``; if any partial sum leaves ``I_{t_acc}``, :class:`AccumulatorOverflow`
    names the first offending element.
    """
    X = np.asarray(X)
    Y = np.asarray(Y)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[1] != Y.shape[0]:
        raise ValueError(f"shape mismatch: {X.shape} @ {Y.shape}")
    inp = cfg.input_format
    if not (inp.contains(X) and inp.contains(Y)):
        raise ValueError(f"inputs must lie in I_{cfg.t_in}")
    acc = cfg.acc_format
    if C is not None:
        C = np.asarray(C)
        if C.shape != (X.shape[0], Y.shape[1]):
            raise ValueError(f"accumulator shape {C.shape} does not match product")
        if not acc.contains(C):
            raise ValueError(f"accumulator input must lie in I_{cfg.t_acc}")

    k = X.shape[1]
    mx, my = _max_abs(X), _max_abs(Y)
    mc = _max_abs(C) if C is not None else 0
    worst = k * mx * my + mc
    if worst < _FLOAT_EXACT:
        P = X.astype(np.float64) @ Y.astype(np.float64)
        if C is not None:
            P += C
        P = P.astype(np.int64)
    elif worst < 2**62:
        P = X.astype(np.int64) @ Y.astype(np.int64)
        if C is not None:
            P += C.astype(np.int64)
    else:
        P = X.astype(object) @ Y.astype(object)
        if C is not None:
            P = P + C.astype(object)

    if worst > acc.hi:
        _check_partial_sums(X, Y, C, cfg)
    return P


def _check_partial_sums(X, Y, C, cfg: MmaConfig):
    lo, hi = cfg.acc_format.lo, cfg.acc_format.hi
    Xo = X.astype(object)
    Yo = Y.astype(object)
    m, n = X.shape[0], Y.shape[1]
    run = np.zeros((m, n), dtype=object) if C is None else C.astype(object)
    if C is not None:
        _raise_if_outside(run, lo, hi, cfg.t_acc)
    for j in range(X.shape[1]):
        run = run + np.outer(Xo[:, j], Yo[j, :])
        _raise_if_outside(run, lo, hi, cfg.t_acc)


def _raise_if_outside(run, lo, hi, t_acc):
    bad = (run < lo) | (run > hi)
    if np.any(bad):
        i, j = np.argwhere(bad)[0]
        raise AccumulatorOverflow(int(i), int(j), int(run[i, j]), t_acc)
