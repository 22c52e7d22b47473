"""Accuracy experiment drivers; each returns a list of flat row dicts."""

from __future__ import annotations

import os
import re
import statistics
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import generators as gen
from .analysis import error_bound
from .blocklu import block_lu_solve, scheme_gemm
from .fpcore import BINARY64
from .mma import MmaConfig
from .oracle import (
    abs_error,
    exact_gemm,
    forward_error,
    hpl_passes,
    hpl_residual,
    max_elementwise_error,
    normwise_gemm_error,
)
from .scheme import Schedule, Strategy, make_plan, multiply

U = BINARY64.u


def parse_sweep(text: str, cast=int) -> list:
    """``a:b`` inclusive range, ``a:step:b`` stepped range, ``{x,y}`` set, or a single value."""
    text = text.strip()
    if text.startswith("{") and text.endswith("}"):
        return [cast(x) for x in text[1:-1].split(",") if x.strip()]
    parts = text.split(":")
    if len(parts) == 1:
        return [cast(parts[0])]
    if len(parts) == 2:
        lo, hi, step = cast(parts[0]), cast(parts[1]), 1
    elif len(parts) == 3:
        lo, step, hi = cast(parts[0]), cast(parts[1]), cast(parts[2])
    else:
        raise ValueError(f"bad sweep {text!r}")
    if step <= 0:
        raise ValueError("sweep step must be positive")
    out, x = [], lo
    while x <= hi:
        out.append(x)
        x += step
    return out


def parse_pairs(text: str) -> list[tuple[int, int]]:
    """``{1,8}^2`` or ``{1,8}²`` for a square grid, otherwise ``a,b;c,d`` pairs."""
    m = re.fullmatch(r"\s*(\{[^}]*\})\s*(\^2|²)\s*", text)
    if m:
        vals = parse_sweep(m.group(1))
        return [(a, b) for a in vals for b in vals]
    return [tuple(int(v) for v in p.split(",")) for p in text.split(";") if p.strip()]


def threads() -> int:
    n = int(os.environ.get("OZMUL_THREADS", "0") or 0)
    return n if n > 0 else (os.cpu_count() or 1)


def _run_rows(jobs, fn, key):
    """Evaluate ``fn`` over ``jobs`` (possibly in parallel) and sort the rows by ``key``."""
    workers = min(threads(), max(len(jobs), 1))
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            rows = list(ex.map(fn, jobs))
    else:
        rows = [fn(j) for j in jobs]
    return sorted(rows, key=key)


def inner_errors(phi: float, s: int, seeds, cfg=MmaConfig(), schedule=Schedule.REDUCED, strategy=Strategy.DIAGONAL):
    """Relative errors of the sliced 2-term inner product, one per seed.

    All seeds are stacked into a single product: row ``i`` of the stacked
    ``A`` meets column ``i`` of ``B`` exactly as in a standalone run, since
    scales are per row/column and every entry is handled independently.
    """
    pairs = [gen.gen_inner_phi(phi, sd) for sd in seeds]
    A = np.vstack([a for a, _ in pairs])
    B = np.hstack([b for _, b in pairs])
    plan = make_plan(2, cfg, s, s, schedule, strategy)
    C, _ = multiply(A, B, cfg, plan)
    exact = [exact_gemm(a, b).fraction(0, 0) for a, b in pairs]
    return [forward_error(float(C[i, i]), exact[i]) for i in range(len(pairs))], plan


def run_inner(phis, ss, seeds=range(100), cfg=MmaConfig(), schedule=Schedule.REDUCED, strategy=Strategy.DIAGONAL):
    def one(job):
        phi, s = job
        errs, plan = inner_errors(phi, s, seeds, cfg, schedule, strategy)
        med = statistics.median(errs)
        return {
            "experiment": "inner",
            "phi": phi,
            "s": s,
            "strategy": plan.strategy.value,
            "schedule": plan.schedule.value,
            "seeds": len(errs),
            "median_error": med,
            "max_error": max(errs),
            "pass": med <= 10 * U,
            "products": plan.num_products,
            "psi": plan.psi,
        }

    jobs = [(phi, s) for phi in phis for s in ss]
    return _run_rows(jobs, one, key=lambda r: (r["phi"], r["s"]))


def run_matmul(phis, ks, ss, seed=0, strategies=(Strategy.DIAGONAL,), schedule=Schedule.REDUCED, cfg=MmaConfig()):
    def one(job):
        phi, k, s, strategy = job
        A, B = gen.gen_lognormal(10, k, 10, phi, seed)
        exact = exact_gemm(A, B)
        plan = make_plan(k, cfg, s, s, schedule, strategy)
        C, diag = multiply(A, B, cfg, plan)
        rep = error_bound(A, B, plan)
        err = max_elementwise_error(C, exact)
        ref = max_elementwise_error(A @ B, exact)
        contained = bool(np.all(abs_error(C, exact) <= rep.bound_matrix))
        return {
            "experiment": "matmul",
            "phi": phi,
            "k": k,
            "s": s,
            "strategy": plan.strategy.value,
            "schedule": plan.schedule.value,
            "max_rel_error": err,
            "binary64_error": ref,
            "bound_coefficient": rep.coefficient,
            "within_bound": contained,
            "pass": err <= max(ref, U),
            "products": diag.products,
            "psi": plan.psi,
        }

    jobs = [(phi, k, s, Strategy(st)) for phi in phis for k in ks for s in ss for st in strategies]
    return _run_rows(jobs, one, key=lambda r: (r["phi"], r["k"], r["s"], r["strategy"]))


def run_blocklu(matrices, pairs, n=500, block=10, seed=0, cfg=MmaConfig(), strategy=Strategy.DIAGONAL):
    def one(job):
        name, (sA, sB) = job
        order = n + 1 if name == "wilkinson" and n % 2 == 0 else n
        A = gen.named(name, order, seed)
        b = gen.rhs(order, seed)
        res = block_lu_solve(A, b, block, scheme_gemm(cfg, sA, sB, strategy=strategy))
        r = hpl_residual(A, res.x, b)
        return {
            "experiment": "blocklu",
            "matrix": name,
            "n": order,
            "block": block,
            "s_A": sA,
            "s_B": sB,
            "hpl_residual": r,
            "pass": hpl_passes(r),
            "s_A_star": res.s_A_star,
            "s_B_star": res.s_B_star,
        }

    jobs = [(m, p) for m in matrices for p in pairs]
    return _run_rows(jobs, one, key=lambda r: (r["matrix"], r["s_A"], r["s_B"]))


def run_kappad(kds, ss, n=256, seed=0, rotate=True, cfg=MmaConfig(), strategy=Strategy.DIAGONAL, schedule=Schedule.REDUCED):
    def one(job):
        kd, s = job
        A, B = gen.gen_kappaD(n, kd, seed, rotate)
        exact = exact_gemm(A, B)
        plan = make_plan(n, cfg, s, s, schedule, strategy)
        C, diag = multiply(A, B, cfg, plan)
        err = max_elementwise_error(C, exact)
        ref = max_elementwise_error(A @ B, exact)
        # The normwise measure is dominated by the largest entries here, so
        # pass/fail follows the elementwise error.
        nw = normwise_gemm_error(C, exact, A, B)
        rep = error_bound(A, B, plan)
        contained = bool(np.all(abs_error(C, exact) <= rep.bound_matrix))
        return {
            "experiment": "kappad",
            "kappa_D": kd,
            "n": n,
            "s": s,
            "rotate": rotate,
            "strategy": plan.strategy.value,
            "max_rel_error": err,
            "binary64_error": ref,
            "normwise_error": nw,
            "within_bound": contained,
            "pass": err <= max(ref, U),
            "products": diag.products,
            "psi": plan.psi,
        }

    jobs = [(kd, s) for kd in kds for s in ss]
    return _run_rows(jobs, one, key=lambda r: (r["kappa_D"], r["s"]))
