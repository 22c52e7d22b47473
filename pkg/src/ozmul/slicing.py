"""Block fixed-point conversion and integer slicing.

Each row of ``A`` (or column of ``B``) shares a power-of-two scale. The scaled
block is a fixed-point fraction in ``(-1, 1)`` and slice ``l`` holds fraction
bits ``(l-1)*t + 1`` to ``l*t``, extracted by shifting and masking the 53-bit
significand of each entry. Signs are carried separately (sign-magnitude), so
truncation rounds toward zero.

In ``nearest`` mode the block scale is doubled, leaving the first slice with
``t - 1`` significant bits, and the fraction is rounded to nearest (ties to
even) at the boundary of slice ``s``; the carry propagates upward and always
fits because of the spare leading bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .fpcore import block_exponents, check_matrix, round_dyadic

_U64 = np.uint64


class Orientation(str, Enum):
    ROWS = "rows"
    COLUMNS = "columns"


class SplitMode(str, Enum):
    TRUNCATE = "truncate"
    NEAREST = "nearest"


@dataclass(frozen=True)
class SlicedMatrix:
    """Block scales plus an ordered tuple of integer slice matrices.

    ``scale_exps`` has one entry per block (row for ``ROWS``, column for
    ``COLUMNS``); the value is reconstructed as ``scale * sum_l 2**(-l*t) * slice_l``.
    """

    orientation: Orientation
    scale_exps: np.ndarray
    t: int
    mode: SplitMode
    slices: tuple
    shape: tuple

    @property
    def s(self) -> int:
        return len(self.slices)

    @property
    def scales(self) -> np.ndarray:
        return np.ldexp(1.0, self.scale_exps)

    def broadcast_exps(self) -> np.ndarray:
        """Scale exponents shaped to broadcast against the matrix."""
        if self.orientation is Orientation.ROWS:
            return self.scale_exps[:, None]
        return self.scale_exps[None, :]


def _decompose(X: np.ndarray):
    """Sign, 53-bit integer significand and exponent with ``|x| = sig * 2**(exp - 53)``."""
    f, E = np.frexp(X)
    sig = np.ldexp(np.abs(f), 53).astype(_U64)
    sign = np.where(X < 0, -1, 1).astype(np.int64)
    return sign, sig, E.astype(np.int64)


def _shift_mask(sig: np.ndarray, r: np.ndarray, t: int) -> np.ndarray:
    """``floor(sig * 2**-r) mod 2**t`` elementwise, for any integer shifts ``r``."""
    mask = _U64((1 << t) - 1)
    right = np.clip(r, 0, 63).astype(_U64)
    left = np.clip(-r, 0, 63).astype(_U64)
    out = np.where(r >= 0, sig >> right, sig << left) & mask
    out = np.where((r >= 64) | (r <= -t), _U64(0), out)
    return out.astype(np.int64)


def _tail_rounds_up(sig: np.ndarray, r: np.ndarray, last: np.ndarray) -> np.ndarray:
    """Round-half-even decision for discarding the low ``r`` bits of ``sig``."""
    rc = np.clip(r, 1, 64)
    low_mask = np.where(rc >= 64, ~_U64(0), (_U64(1) << np.minimum(rc, 63).astype(_U64)) - _U64(1))
    tail = sig & low_mask
    half_shift = np.minimum(rc - 1, 63).astype(_U64)
    half = _U64(1) << half_shift
    # Past 54 bits even the half-ulp exceeds any 53-bit significand.
    valid = (r > 0) & (r <= 54)
    up = (tail > half) | ((tail == half) & ((last & 1) == 1))
    return valid & up


def _split(X: np.ndarray, exps: np.ndarray, t: int, s: int, mode: SplitMode) -> list:
    sign, sig, E = _decompose(X)
    base = 53 + exps - E
    slices = [_shift_mask(sig, base - l * t, t) for l in range(1, s + 1)]
    if mode is SplitMode.NEAREST and s > 0:
        carry = _tail_rounds_up(sig, base - s * t, slices[-1]).astype(np.int64)
        for l in range(s - 1, -1, -1):
            v = slices[l] + carry
            carry = v >> t
            slices[l] = v & ((1 << t) - 1)
        assert not np.any(carry), "carry out of the leading slice"
    return [sign * S for S in slices]


def _block_exps(X: np.ndarray, axis: int, mode: SplitMode) -> np.ndarray:
    exps = block_exponents(X, axis=axis)
    if mode is SplitMode.NEAREST:
        nonzero = np.any(X != 0, axis=axis)
        exps = np.where(nonzero, exps + 1, exps)
    return exps


def split_rows(A, t: int, s: int, mode=SplitMode.TRUNCATE) -> SlicedMatrix:
    """Split ``A`` into ``s`` slices of width ``t`` using one scale per row."""
    mode = SplitMode(mode)
    _check_ts(t, s)
    A = check_matrix(A, "A")
    exps = _block_exps(A, 1, mode)
    slices = _split(A, exps[:, None], t, s, mode)
    return SlicedMatrix(Orientation.ROWS, exps, t, mode, tuple(slices), A.shape)


def split_cols(B, t: int, s: int, mode=SplitMode.TRUNCATE) -> SlicedMatrix:
    """Split ``B`` into ``s`` slices of width ``t`` using one scale per column."""
    mode = SplitMode(mode)
    _check_ts(t, s)
    B = check_matrix(B, "B")
    exps = _block_exps(B, 0, mode)
    slices = _split(B, exps[None, :], t, s, mode)
    return SlicedMatrix(Orientation.COLUMNS, exps, t, mode, tuple(slices), B.shape)


def split(M, t: int, s: int, orientation, mode=SplitMode.TRUNCATE) -> SlicedMatrix:
    if Orientation(orientation) is Orientation.ROWS:
        return split_rows(M, t, s, mode)
    return split_cols(M, t, s, mode)


def _check_ts(t: int, s: int):
    if t < 1:
        raise ValueError(f"slice width t must be at least 1, got {t}")
    if s < 1:
        raise ValueError(f"slice count s must be at least 1, got {s}")


def reconstruct(S: SlicedMatrix) -> np.ndarray:
    """Evaluate ``scale * sum_l 2**(-l*t) * slice_l`` with a single rounding."""
    if S.s == 0:
        return np.zeros(S.shape)
    t, s = S.t, S.s
    low = S.broadcast_exps() - s * t
    low = np.broadcast_to(low, S.shape)
    if s * t <= 53 and low.min() >= -1074:
        N = np.zeros(S.shape, dtype=np.int64)
        for sl in S.slices:
            N = (N << t) + sl
        with np.errstate(over="raise"):
            return np.ldexp(N.astype(np.float64), low)
    out = np.empty(S.shape)
    for idx in np.ndindex(S.shape):
        n = 0
        for sl in S.slices:
            n = (n << t) + int(sl[idx])
        out[idx] = round_dyadic(n, int(low[idx]))
    return out


def bit_spread(x: float) -> int:
    """Number of bits from the highest to the lowest set significand bit, inclusive."""
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"bit spread of non-finite value {x}")
    if x == 0.0:
        return 0
    num, den = abs(x).as_integer_ratio()
    # den is a power of two, so the significand bits are those of num.
    return num.bit_length() - ((num & -num).bit_length() - 1)


def _lsb_exponents(X: np.ndarray) -> np.ndarray:
    """Exponent of the least significant set bit of each nonzero entry."""
    _, sig, E = _decompose(X)
    low = sig & (~sig + _U64(1))
    tz = np.frexp(low.astype(np.float64))[1].astype(np.int64) - 1
    return E - 53 + tz


def min_exact_slices(M, t: int, orientation) -> int:
    """Smallest ``s`` for which truncated splitting of ``M`` is exact."""
    if t < 1:
        raise ValueError(f"t must be at least 1, got {t}")
    orientation = Orientation(orientation)
    M = check_matrix(M)
    nz = M != 0
    if not np.any(nz):
        return 1
    axis = 1 if orientation is Orientation.ROWS else 0
    exps = block_exponents(M, axis=axis)
    exps = exps[:, None] if axis == 1 else exps[None, :]
    need = np.where(nz, exps - _lsb_exponents(M), 0)
    return max(1, -(-int(need.max()) // t))
