"""Slice-product schedules, accumulation strategies and the multiplication driver.

Products ``A_(l) B^(h)`` that share ``l + h`` lie on the same *diagonal* and
carry the same power-of-two weight. Diagonals are numbered from 0 (the pair
``(1, 1)``) and are always accumulated in increasing order; within a diagonal
products are taken by increasing ``l``.

Accumulation strategies:

``float-per-product``
    every exact integer product is converted and added in binary64.
``diagonal-integer``
    products on a diagonal are chained in the integer accumulator, flushing
    to binary64 once the accumulator headroom is used up.
``levelled-exact``
    consecutive diagonals are grouped into levels whose binary64 sum is exact
    in the worst case; the level sums are then combined with a single
    rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .fpcore import BINARY64, ceil_log2, check_matrix
from .mma import CapacityError, MmaConfig, integer_gemm, optimal_slice_width
from .slicing import SplitMode, split_cols, split_rows


class Schedule(str, Enum):
    FULL = "full"
    REDUCED = "reduced"


class Strategy(str, Enum):
    FLOAT = "float-per-product"
    DIAGONAL = "diagonal-integer"
    LEVELLED = "levelled-exact"


STRATEGY_ALIASES = {
    "float": Strategy.FLOAT,
    "diagonal": Strategy.DIAGONAL,
    "levelled": Strategy.LEVELLED,
    "leveled": Strategy.LEVELLED,
}


def parse_strategy(name) -> Strategy:
    if isinstance(name, Strategy):
        return name
    return STRATEGY_ALIASES.get(name) or Strategy(name)


def chi(s_A: int, s_B: int) -> int:
    """Number of products in the reduced schedule."""
    if s_A < 1 or s_B < 1:
        raise ValueError("slice counts must be positive")
    s_M, s_m = max(s_A, s_B), min(s_A, s_B)
    return s_m * (2 * s_M - s_m + 1) // 2


def schedule_pairs(s_A: int, s_B: int, schedule=Schedule.REDUCED, limit: int | None = None) -> list[tuple[int, int]]:
    """1-based ``(l, h)`` pairs in accumulation order.

    ``limit`` keeps only the first ``limit`` diagonals of the schedule.
    """
    schedule = Schedule(schedule)
    last = s_A + s_B if schedule is Schedule.FULL else max(s_A, s_B) + 1
    if limit is not None:
        if limit < 1:
            raise ValueError("diagonal limit must be positive")
        last = min(last, limit + 1)
    return [
        (l, d - l)
        for d in range(2, last + 1)
        for l in range(max(1, d - s_B), min(s_A, d - 1) + 1)
    ]


def diagonals(s_A: int, s_B: int, schedule=Schedule.REDUCED, limit: int | None = None) -> list[list[tuple[int, int]]]:
    groups: dict[int, list] = {}
    for l, h in schedule_pairs(s_A, s_B, schedule, limit):
        groups.setdefault(l + h - 2, []).append((l, h))
    return [groups[d] for d in sorted(groups)]


def spare_carries(K: int, M: int, t: int) -> int:
    """Spare carry positions of a level spanning diagonals ``K`` to ``M``."""
    if not 1 <= K <= M:
        raise ValueError(f"need 1 <= K <= M, got K={K}, M={M}")
    return (M - K + 1) * ((1 << (t + 1)) - M - K) // 2


def level_worst_case(t: int, T_used: int, K: int, M: int, products=None) -> int:
    """Largest possible magnitude of a level sum, in units of its lowest diagonal.

    Diagonal ``d`` holds ``products[d]`` products (default ``d + 1``), each
    below ``2**T_used`` in magnitude.
    """
    unit = (1 << T_used) - 1
    total = 0
    for d in range(K, M + 1):
        n = products[d] if products is not None else d + 1
        total += n * unit << ((M - d) * t)
    return total


def level_is_exact(p: int, t: int, T_used: int, K: int, M: int, products=None) -> bool:
    """Whether every partial sum of the level is representable with ``p`` bits."""
    return level_worst_case(t, T_used, K, M, products) <= 1 << p


@dataclass(frozen=True)
class LevelPlan:
    levels: tuple  # inclusive (first, last) diagonal ranges
    q: int  # diagonals per level beyond the first, from the closed-form bound
    extra_bits: int
    exact: tuple  # per level: worst-case sum representable
    residual: int
    psi: int


def plan_levels(p: int, t: int, T_used: int, num_diagonals: int, products=None) -> LevelPlan:
    """Group diagonals into levels whose binary64 sums are exact.

    The first level holds diagonal 0 plus ``q`` more; later levels hold ``q``
    each (at least one), where ``q = floor((p - T' - 1 - extra) / t)`` and
    ``extra`` covers negative spare-carry counts. Each level is then checked
    against the exact worst-case bit growth and split further if needed.
    """
    D = num_diagonals
    if D < 1:
        raise ValueError("need at least one diagonal")
    eta = spare_carries(1, D - 1, t) if D >= 2 else 0
    extra = ceil_log2(-eta) if eta < 0 else 0
    q = max(0, (p - T_used - 1 - extra) // t)

    ranges = [(0, min(q, D - 1))]
    step = max(q, 1)
    d = ranges[0][1] + 1
    while d < D:
        ranges.append((d, min(d + step - 1, D - 1)))
        d += step

    levels, exact, residual = [], [], 0
    for K, M in ranges:
        start = K
        while start <= M:
            end = start
            while end < M and level_is_exact(p, t, T_used, start, end + 1, products):
                end += 1
            ok = level_is_exact(p, t, T_used, start, end, products)
            if not ok:
                n = products[start] if products is not None else start + 1
                residual += n - 1
            levels.append((start, end))
            exact.append(ok)
            start = end + 1
    return LevelPlan(tuple(levels), q, extra, tuple(exact), residual, len(levels) - 1 + residual)


def diagonal_flush_threshold(cfg: MmaConfig, t: int, k: int) -> int:
    """Number of ``k``-term slice products that can be chained in the accumulator."""
    K = cfg.t_acc - 2 * t - ceil_log2(k)
    if K < 0:
        raise CapacityError(f"a single product with t={t}, k={k} overflows I_{cfg.t_acc}")
    return 1 << K


@dataclass(frozen=True)
class MultiplyPlan:
    k: int
    t: int
    s_A: int
    s_B: int
    schedule: Schedule
    strategy: Strategy
    mode: SplitMode
    t_used: int
    flush_every: int
    psi: int
    levels: LevelPlan | None = None
    diagonal_limit: int | None = None

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return schedule_pairs(self.s_A, self.s_B, self.schedule, self.diagonal_limit)

    @property
    def num_products(self) -> int:
        return len(self.pairs)

    def to_dict(self) -> dict:
        d = {
            "k": self.k,
            "t": self.t,
            "s_A": self.s_A,
            "s_B": self.s_B,
            "schedule": self.schedule.value,
            "strategy": self.strategy.value,
            "mode": self.mode.value,
            "t_used": self.t_used,
            "flush_every": self.flush_every,
            "psi": self.psi,
        }
        if self.levels is not None:
            d["levels"] = [list(r) for r in self.levels.levels]
        if self.diagonal_limit is not None:
            d["diagonal_limit"] = self.diagonal_limit
        return d


def make_plan(
    k: int,
    cfg: MmaConfig = MmaConfig(),
    s_A: int = 8,
    s_B: int | None = None,
    schedule=Schedule.REDUCED,
    strategy=Strategy.DIAGONAL,
    mode=SplitMode.TRUNCATE,
    t: int | None = None,
    diagonal_limit: int | None = None,
) -> MultiplyPlan:
    """Choose slice width, flush threshold, levels and the inexact-add count ``psi``.

    ``diagonal_limit`` truncates the schedule to its leading diagonals; the
    error bounds of :mod:`ozmul.analysis` do not cover truncated plans.
    """
    s_B = s_A if s_B is None else s_B
    schedule, strategy, mode = Schedule(schedule), parse_strategy(strategy), SplitMode(mode)
    if s_A < 1 or s_B < 1:
        raise ValueError("slice counts must be positive")
    if t is None:
        t = optimal_slice_width(cfg, k)
    if not 1 <= t <= cfg.t_in:
        raise CapacityError(f"slice width {t} does not fit I_{cfg.t_in} inputs")
    t_used = 2 * t + ceil_log2(k)
    if t_used > cfg.t_acc:
        raise CapacityError(
            f"k = {k} with t = {t} needs {t_used} accumulator bits, I_{cfg.t_acc} has {cfg.t_acc}"
        )
    p = BINARY64.p
    if t_used > p:
        raise CapacityError(f"products need {t_used} bits; conversion to binary64 would round")
    flush = diagonal_flush_threshold(cfg, t, k)
    # Chained sums must also convert exactly to binary64.
    flush = min(flush, 1 << (p - t_used))

    counts = [len(g) for g in diagonals(s_A, s_B, schedule, diagonal_limit)]
    levels = None
    if strategy is Strategy.FLOAT:
        psi = sum(counts) - 1
    elif strategy is Strategy.DIAGONAL:
        psi = sum(-(-n // flush) for n in counts) - 1
    else:
        levels = plan_levels(p, t, t_used, len(counts), counts)
        psi = levels.psi
    return MultiplyPlan(k, t, s_A, s_B, schedule, strategy, mode, t_used, flush, psi, levels, diagonal_limit)


@dataclass
class Diagnostics:
    products: int = 0
    integer_adds: int = 0  # per output element
    float_adds: int = 0  # per output element
    realized_psi: int = 0  # float additions that may round, per element
    flushes: int = 0  # extra flushes forced by accumulator headroom
    levels: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "products": self.products,
            "integer_adds": self.integer_adds,
            "float_adds": self.float_adds,
            "realized_psi": self.realized_psi,
            "flushes": self.flushes,
            "levels": [list(r) for r in self.levels],
        }


class PlanViolation(AssertionError):
    """An accumulation the plan declared exact turned out to round."""


def _exact_add(acc: np.ndarray, x: np.ndarray) -> np.ndarray:
    s = acc + x
    bb = s - acc
    err = (acc - (s - bb)) + (x - bb)
    if np.any(err != 0):
        raise PlanViolation("level sum is not exact in binary64")
    return s


def _combine_levels(parts: list) -> np.ndarray:
    """Correctly rounded sum of exact per-level matrices."""
    S = parts[0].copy()
    inexact = np.zeros(S.shape, dtype=bool)
    for x in parts[1:]:
        s = S + x
        bb = s - S
        err = (S - (s - bb)) + (x - bb)
        inexact |= err != 0
        S = s
    if np.any(inexact):
        stack = np.stack(parts)
        for idx in zip(*np.nonzero(inexact)):
            S[idx] = math.fsum(stack[(slice(None),) + idx])
    return S


class _Accumulator:
    """Chains products of one diagonal in the integer unit and flushes to binary64."""

    def __init__(self, cfg, flush_every, diag):
        self.cfg, self.flush_every, self.diag = cfg, flush_every, diag
        self.acc = None
        self.count = 0
        self.flushes = 0

    def add(self, X, Y):
        self.acc = integer_gemm(X, Y, self.cfg, C=self.acc)
        self.count += 1
        if self.count == self.flush_every:
            return self.take()
        return None

    def take(self):
        if self.acc is None:
            return None
        out = np.asarray(self.acc, dtype=np.float64)
        self.acc, self.count = None, 0
        self.flushes += 1
        return out


def multiply(A, B, cfg: MmaConfig = MmaConfig(), plan: MultiplyPlan | None = None):
    """Approximate ``A @ B`` with exact integer slice products.

    Returns ``(C, Diagnostics)``. Block scales are applied by exponent
    adjustment at the end, so the only roundings are the binary64
    accumulations the strategy performs.
    """
    A = check_matrix(A, "A")
    B = check_matrix(B, "B")
    if A.shape[1] != B.shape[0]:
        raise ValueError(f"shape mismatch: {A.shape} @ {B.shape}")
    k = A.shape[1]
    if plan is None:
        plan = make_plan(max(k, 1), cfg)
    if plan.k != max(k, 1):
        raise ValueError(f"plan was made for k = {plan.k}, inputs have k = {k}")
    m, n = A.shape[0], B.shape[1]
    diag = Diagnostics(levels=list(plan.levels.levels) if plan.levels else [])
    if k == 0 or m == 0 or n == 0:
        return np.zeros((m, n)), diag

    t = plan.t
    SA = split_rows(A, t, plan.s_A, plan.mode)
    SB = split_cols(B, t, plan.s_B, plan.mode)
    Af = [np.asarray(x, dtype=np.float64) for x in SA.slices]
    Bf = [np.asarray(x, dtype=np.float64) for x in SB.slices]
    groups = diagonals(plan.s_A, plan.s_B, plan.schedule, plan.diagonal_limit)
    diag.products = sum(len(g) for g in groups)
    # Diagonal d carries weight 2**(-(d + 2) t) on top of the block scales.
    exps = SA.scale_exps[:, None] + SB.scale_exps[None, :] - 2 * t

    if plan.strategy is Strategy.FLOAT:
        S = np.zeros((m, n))
        for d, group in enumerate(groups):
            for l, h in group:
                P = integer_gemm(Af[l - 1], Bf[h - 1], cfg)
                S += np.ldexp(P.astype(np.float64), exps - d * t)
        diag.integer_adds = diag.products * (k - 1)
        diag.float_adds = diag.products - 1
        diag.realized_psi = diag.float_adds
        return S, diag

    chunks, extra = _diagonal_chunks(groups, Af, Bf, cfg, plan)
    diag.integer_adds = diag.products * k - len(chunks)
    diag.flushes = extra
    if plan.strategy is Strategy.DIAGONAL:
        S = np.zeros((m, n))
        for d, X in chunks:
            S += np.ldexp(X, exps - d * t)
        diag.float_adds = len(chunks) - 1
        diag.realized_psi = diag.float_adds
        return S, diag

    S, diag.float_adds, diag.realized_psi = _levelled(chunks, plan.levels, exps, t)
    return S, diag


def _diagonal_chunks(groups, Af, Bf, cfg, plan):
    """Integer diagonal sums, split wherever the accumulator headroom runs out."""
    chunks = []
    extra = 0
    for d, group in enumerate(groups):
        acc = _Accumulator(cfg, plan.flush_every, d)
        for l, h in group:
            out = acc.add(Af[l - 1], Bf[h - 1])
            if out is not None:
                chunks.append((d, out))
        last = acc.take()
        if last is not None:
            chunks.append((d, last))
        extra += acc.flushes - 1
    return chunks, extra


def _levelled(chunks, lp: LevelPlan, exps, t):
    parts = []
    fadds = inexact = 0
    pos = 0
    for (K, M), ok in zip(lp.levels, lp.exact):
        level = None
        # Sum in units of the level's leading diagonal, then rescale once.
        while pos < len(chunks) and chunks[pos][0] <= M:
            d, X = chunks[pos]
            term = np.ldexp(X, -(d - K) * t)
            if level is None:
                level = term
            elif ok:
                level = _exact_add(level, term)
                fadds += 1
            else:
                level = level + term
                fadds += 1
                inexact += 1
            pos += 1
        if level is not None:
            parts.append(np.ldexp(level, exps - K * t))
    if len(parts) > 1:
        fadds += len(parts) - 1
        inexact += 1
    return _combine_levels(parts), fadds, inexact


def gemm(A, B, cfg: MmaConfig = MmaConfig(), plan: MultiplyPlan | None = None, alpha=1.0, beta=0.0, C=None):
    """``alpha * (A @ B) + beta * C`` with the product computed by :func:`multiply`."""
    P, diag = multiply(A, B, cfg, plan)
    D = alpha * P if alpha != 1.0 else P
    if beta != 0.0 and C is not None:
        D = D + beta * np.asarray(C, dtype=np.float64)
    return D, diag
