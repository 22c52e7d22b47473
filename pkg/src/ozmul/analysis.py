"""A-priori error bounds for the sliced product and the slice-count selector."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fpcore import BINARY64, check_matrix
from .mma import MmaConfig
from .scheme import MultiplyPlan, Schedule, Strategy, chi, make_plan
from .slicing import Orientation, SplitMode


def _block_ratios(M: np.ndarray, axis: int) -> np.ndarray:
    """max |m| / min nonzero |m| per block; 1 for an all-zero block."""
    absM = np.abs(M)
    big = absM.max(axis=axis) if M.shape[axis] else np.zeros(M.shape[1 - axis])
    small = np.where(absM > 0, absM, np.inf).min(axis=axis, initial=np.inf)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        r = np.where(big > 0, big / small, 1.0)
    return r


def kappa(M, orientation=Orientation.ROWS) -> float:
    """Twice the worst max/min magnitude ratio over the blocks of ``M``.

    Zero entries are skipped when taking the minimum: they are sliced
    exactly, and including them would make the measure infinite.
    """
    M = check_matrix(M)
    axis = 1 if Orientation(orientation) is Orientation.ROWS else 0
    r = _block_ratios(M, axis)
    return 2.0 * float(r.max()) if r.size else 2.0


@dataclass(frozen=True)
class ScalingProfile:
    kappa_A: float
    kappa_B: float
    row_ratios: np.ndarray
    col_ratios: np.ndarray
    zero_blocks: int

    @classmethod
    def of(cls, A, B) -> "ScalingProfile":
        A = check_matrix(A, "A")
        B = check_matrix(B, "B")
        rows = _block_ratios(A, 1)
        cols = _block_ratios(B, 0)
        zeros = int(np.sum(~np.any(A != 0, axis=1)) + np.sum(~np.any(B != 0, axis=0)))
        return cls(
            2.0 * float(rows.max(initial=1.0)),
            2.0 * float(cols.max(initial=1.0)),
            rows,
            cols,
            zeros,
        )


def zeta(kA: float, kB: float, s_A: int, s_B: int, t: int) -> float:
    """Truncation coefficient ``2^-sA t kA + 2^-sB t kB + 2^-(sA+sB) t kA kB``."""
    a = np.ldexp(kA, -s_A * t)
    b = np.ldexp(kB, -s_B * t)
    return float(a + b + a * b)


def gamma(n: int, u: float = BINARY64.u) -> float:
    nu = n * u
    if nu >= 1:
        raise ValueError(f"n*u = {nu} >= 1, gamma_n is undefined")
    return nu / (1 - nu)


@dataclass(frozen=True)
class ErrorReport:
    kappa_A: float
    kappa_B: float
    zeta: float
    psi: int
    gamma_psi: float
    coefficient: float
    first_order_bound: float
    bound_kind: str  # full | reduced-sA<=sB | reduced-sA>sB
    bound_matrix: np.ndarray

    def to_dict(self) -> dict:
        return {
            "kappa_A": self.kappa_A,
            "kappa_B": self.kappa_B,
            "zeta": self.zeta,
            "psi": self.psi,
            "gamma_psi": self.gamma_psi,
            "coefficient": self.coefficient,
            "first_order_bound": self.first_order_bound,
            "bound_kind": self.bound_kind,
        }


def bound_coefficient(kA, kB, plan: MultiplyPlan, u: float = BINARY64.u):
    """Coefficient ``c`` with ``|C_hat - C| <= c |A||B|``, and the bound kind."""
    sA, sB, t = plan.s_A, plan.s_B, plan.t
    if plan.diagonal_limit is not None:
        raise ValueError("no a-priori bound for a plan with truncated diagonals")
    z = zeta(kA, kB, sA, sB, t)
    g = gamma(plan.psi, u)
    if plan.schedule is Schedule.FULL:
        return z + g * (1 + z), "full"
    # Nearest-mode scales are doubled, which doubles both factors of the
    # omitted-product estimate.
    spread = 4.0 if plan.mode is SplitMode.NEAREST else 1.0
    if sA <= sB:
        omit, kind = np.ldexp(spread * sA * kA * kB, -sB * t), "reduced-sA<=sB"
    else:
        omit, kind = np.ldexp(spread * sB * kA * kB, -sA * t), "reduced-sA>sB"
    omit = float(omit)
    return z + omit + g * (1 + z + omit), kind


def error_bound(A, B, plan: MultiplyPlan, u: float = BINARY64.u) -> ErrorReport:
    """Entrywise a-priori bound on the error of :func:`ozmul.scheme.multiply`."""
    A = check_matrix(A, "A")
    B = check_matrix(B, "B")
    prof = ScalingProfile.of(A, B)
    kA, kB = prof.kappa_A, prof.kappa_B
    coef, kind = bound_coefficient(kA, kB, plan, u)
    k = A.shape[1]
    # |A||B| is itself evaluated in binary64; inflate to stay an upper bound.
    absAB = np.abs(A) @ np.abs(B)
    inflate = 1 + 2 * (k + 4) * u
    bound = absAB * (coef * inflate)
    first = float(np.ldexp(kA, -plan.s_A * plan.t) + np.ldexp(kB, -plan.s_B * plan.t) + plan.psi * u)
    return ErrorReport(
        kA,
        kB,
        zeta(kA, kB, plan.s_A, plan.s_B, plan.t),
        plan.psi,
        gamma(plan.psi, u),
        coef,
        first,
        kind,
        bound,
    )


class InfeasibleSlices(ValueError):
    """No slice pair in range meets the target; ``gap`` is the best achieved lhs/target."""

    def __init__(self, gap: float, s_max: int):
        self.gap = gap
        self.s_max = s_max
        super().__init__(
            f"no (s_A, s_B) <= {s_max} meets the target; best ratio to target is {gap:.3g}"
        )


def _candidate_psi(sA, sB, k, cfg, schedule, strategy, t):
    if k is None:
        # Without a concrete k, assume one float addition per diagonal.
        D = sA + sB - 1 if Schedule(schedule) is Schedule.FULL else max(sA, sB)
        return D - 1
    return make_plan(k, cfg, sA, sB, schedule, strategy, t=t).psi


def select_slices(
    kA: float,
    kB: float,
    t: int,
    u: float = BINARY64.u,
    target: float | None = None,
    s_max: int = 20,
    k: int | None = None,
    cfg: MmaConfig = MmaConfig(),
    schedule=Schedule.REDUCED,
    strategy=Strategy.DIAGONAL,
) -> tuple[int, int]:
    """Cheapest ``(s_A, s_B)`` with ``kA 2^-sA t + kB 2^-sB t <= target``.

    Cost is the number of slice products: ``chi`` for the reduced schedule,
    ``s_A * s_B`` for the full one.

    The default target is ``gamma_psi`` with ``psi`` taken from the plan each
    candidate pair would run with. Ties in ``chi`` go to the smaller
    ``max(s_A, s_B)``, then the smaller ``s_A``.
    """
    if t < 1 or not 0 < u < 1 or not 1 <= s_max <= 64:
        raise ValueError("need t >= 1, 0 < u < 1 and 1 <= s_max <= 64")
    best, best_key, gap = None, None, np.inf
    for sA in range(1, s_max + 1):
        a = float(np.ldexp(kA, -sA * t))
        for sB in range(1, s_max + 1):
            lhs = a + float(np.ldexp(kB, -sB * t))
            tgt = target
            if tgt is None:
                tgt = gamma(_candidate_psi(sA, sB, k, cfg, schedule, strategy, t), u)
            if tgt > 0:
                gap = min(gap, lhs / tgt)
            if lhs <= tgt:
                cost = sA * sB if Schedule(schedule) is Schedule.FULL else chi(sA, sB)
                key = (cost, max(sA, sB), sA)
                if best_key is None or key < best_key:
                    best, best_key = (sA, sB), key
    if best is None:
        raise InfeasibleSlices(gap, s_max)
    return best
