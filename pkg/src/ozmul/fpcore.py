"""Floating-point and integer formats, rounding, and block scale factors.

Scale factors are returned as integer exponents ``e`` so that the scale is
``2**e``. Three interchangeable methods are provided: a direct one based on
``frexp``, one that exploits binary64 roundoff, and one that manipulates the
bit pattern of the binary64 encoding.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

_EXP_MASK = 0x7FF0_0000_0000_0000
_EXP_LSB = 1 << 52
_SMALLEST_NORMAL = 2.0**-1022
# Above this, u**-1 * M overflows in binary64.
_FL_TRICK_MAX = 2.0**970


@dataclass(frozen=True)
class FloatFormat:
    """The floating-point system with precision ``p`` and exponent bound ``e_max``.

    ``e_min`` follows the IEEE construction rule ``e_min = 1 - e_max``.
    """

    p: int = 53
    e_max: int = 1023

    def __post_init__(self):
        if self.p < 2:
            raise ValueError(f"precision must be at least 2, got {self.p}")
        if self.e_max < 1:
            raise ValueError(f"e_max must be positive, got {self.e_max}")

    @property
    def e_min(self) -> int:
        return 1 - self.e_max

    @property
    def u(self) -> float:
        """Unit roundoff ``2**-p``."""
        return 2.0**-self.p

    @property
    def exponent_bits(self) -> int | None:
        """Width of the exponent field, if ``e_max`` has the IEEE form ``2**(b-1) - 1``."""
        b = (self.e_max + 1).bit_length()
        return b if (1 << (b - 1)) - 1 == self.e_max else None

    @property
    def max_finite(self) -> Fraction:
        return Fraction(2 ** self.p - 1) * Fraction(2) ** (self.e_max - self.p + 1)


BINARY64 = FloatFormat()


@dataclass(frozen=True)
class IntFormat:
    """Signed two's complement integers with ``t + 1`` bits."""

    t: int

    def __post_init__(self):
        if self.t < 0:
            raise ValueError(f"t must be non-negative, got {self.t}")

    @property
    def lo(self) -> int:
        return -(1 << self.t)

    @property
    def hi(self) -> int:
        return (1 << self.t) - 1

    def contains(self, x) -> bool:
        x = np.asarray(x)
        if x.size == 0:
            return True
        return bool(x.min() >= self.lo and x.max() <= self.hi)


def ceil_log2(k: int) -> int:
    """Exact ``ceil(log2(k))`` for a positive integer."""
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    return (int(k) - 1).bit_length()


def _round_rational(num: int, den: int, fmt: FloatFormat) -> float:
    if num == 0:
        return 0.0
    if fmt.p > 53 or fmt.e_max > 1023:
        raise ValueError("format must embed in binary64")
    negative = (num < 0) != (den < 0)
    num, den = abs(num), abs(den)

    # floor(log2(num/den))
    e = num.bit_length() - den.bit_length()
    if (num << -e if e < 0 else num) < (den << e if e > 0 else den):
        e -= 1
    q = max(e, fmt.e_min) - (fmt.p - 1)
    n, d = (num, den << q) if q >= 0 else (num << -q, den)
    quo, rem = divmod(n, d)
    if 2 * rem > d or (2 * rem == d and quo & 1):
        quo += 1
    if Fraction(quo) * Fraction(2) ** q > fmt.max_finite:
        raise OverflowError(f"value overflows the format (p={fmt.p}, e_max={fmt.e_max})")
    r = math.ldexp(float(quo), q)
    return -r if negative else r


def round_dyadic(sig: int, exp: int, fmt: FloatFormat = BINARY64) -> float:
    """Round ``sig * 2**exp`` to nearest (ties to even) in ``fmt``."""
    if exp >= 0:
        return _round_rational(sig << exp, 1, fmt)
    return _round_rational(sig, 1 << -exp, fmt)


def round_nearest(x, fmt: FloatFormat = BINARY64) -> float:
    """Round ``x`` to the nearest element of ``fmt``, breaking ties to even.

    ``x`` may be a float, an int, or a :class:`fractions.Fraction`. Raises
    :class:`OverflowError` instead of producing an infinity.
    """
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"cannot round non-finite value {x}")
        num, den = x.as_integer_ratio()
    else:
        x = Fraction(x)
        num, den = x.numerator, x.denominator
    return _round_rational(num, den, fmt)


def check_matrix(A, name: str = "matrix") -> np.ndarray:
    """Return ``A`` as a 2-D float64 array, rejecting inf, NaN and negative zero."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains infinities or NaNs")
    if np.any(np.signbit(A) & (A == 0)):
        raise ValueError(f"{name} contains negative zeros")
    return A


# ---------------------------------------------------------------------------
# Scale factors


def scale_factor(values) -> int:
    """Exponent of the smallest power of two strictly larger than ``max |values|``.

    Returns 0 (scale 1) for an all-zero block.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("values must be nonempty")
    if not np.all(np.isfinite(v)):
        raise ValueError("values must be finite")
    M = float(np.max(np.abs(v)))
    if M == 0.0:
        return 0
    return math.frexp(M)[1]


def scale_factor_fl_trick(M: float) -> int:
    """Scale exponent computed as ``u**-1 * M + (1 - u**-1) * M`` in binary64.

    The binary64 evaluation rounds to ``2**ceil(log2 M)``; at exact powers of
    two that equals ``M`` and is doubled to keep the scale strictly larger.
    """
    M = float(M)
    if not M > 0.0 or not math.isfinite(M):
        raise ValueError(f"M must be positive and finite, got {M}")
    if M < _SMALLEST_NORMAL or M >= _FL_TRICK_MAX:
        return scale_factor([M])
    uinv = 2.0**53
    a = uinv * M + (1.0 - uinv) * M
    if a == M:
        a = 2.0 * a
    return math.frexp(a)[1] - 1


def scale_factor_bits(M: float) -> int:
    """Scale exponent from the bit pattern of ``M``.

    Clears sign and fraction fields, then adds one at the exponent LSB.
    """
    M = float(M)
    if not M > 0.0 or not math.isfinite(M):
        raise ValueError(f"M must be positive and finite, got {M}")
    if M < _SMALLEST_NORMAL:
        return scale_factor([M])
    bits = struct.unpack("<Q", struct.pack("<d", M))[0]
    bits = (bits & _EXP_MASK) + _EXP_LSB
    return (bits >> 52) - 1023


def block_exponents(X, axis: int, method: str = "direct") -> np.ndarray:
    """Vectorised scale exponents of every row (``axis=1``) or column (``axis=0``).

    Zero blocks get exponent 0. ``method`` is one of ``direct``, ``fl`` or ``bits``.
    """
    X = np.asarray(X, dtype=np.float64)
    M = np.max(np.abs(X), axis=axis) if X.shape[axis] else np.zeros(X.shape[1 - axis])
    return _exponents_of_max(M, method)


def _exponents_of_max(M: np.ndarray, method: str) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    direct = np.frexp(M)[1].astype(np.int64)
    if method == "direct":
        return direct
    normal = (M >= _SMALLEST_NORMAL) & (M < _FL_TRICK_MAX)
    if method == "fl":
        uinv = 2.0**53
        with np.errstate(over="ignore", invalid="ignore"):
            a = uinv * M + (1.0 - uinv) * M
        a = np.where(a == M, 2.0 * a, a)
        out = np.frexp(a)[1].astype(np.int64) - 1
    elif method == "bits":
        raw = M.view(np.uint64)
        raw = (raw & np.uint64(_EXP_MASK)) + np.uint64(_EXP_LSB)
        out = (raw >> np.uint64(52)).astype(np.int64) - 1023
        normal = M >= _SMALLEST_NORMAL
    else:
        raise ValueError(f"unknown scale method {method!r}")
    return np.where(normal, out, direct)
