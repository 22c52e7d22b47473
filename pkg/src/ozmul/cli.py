"""Command-line front end.

Exit codes: 0 success, 1 usage or I/O error, 2 infeasible slice selection
or a failed accuracy threshold.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import asdict, dataclass, field

from . import experiments as ex
from .analysis import InfeasibleSlices, ScalingProfile, error_bound, select_slices, zeta
from .fileio import FormatError, read_matrix, write_matrix
from .fpcore import BINARY64
from .mma import CapacityError, MmaConfig, max_k
from .oracle import exact_gemm, max_elementwise_error, normwise_gemm_error
from .scheme import Schedule, make_plan, multiply, parse_strategy
from .slicing import SplitMode

EXIT_OK, EXIT_USAGE, EXIT_FAILED = 0, 1, 2


@dataclass
class RunRecord:
    command: str
    config: dict
    plan: dict = field(default_factory=dict)
    genspec: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunRecord":
        return cls(**json.loads(text))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _cfg(args) -> MmaConfig:
    return MmaConfig(args.t_in, args.t_acc)


def _add_mma_flags(p):
    p.add_argument("--t-in", type=int, default=7, help="input width t' (I_t' inputs)")
    p.add_argument("--t-acc", type=int, default=31, help="accumulator width T (I_T accumulators)")


def _add_plan_flags(p):
    p.add_argument("--sa", type=int, default=8, help="slices of A")
    p.add_argument("--sb", type=int, default=None, help="slices of B (default: same as --sa)")
    p.add_argument("--schedule", choices=[s.value for s in Schedule], default="reduced")
    p.add_argument(
        "--strategy",
        default="diagonal",
        help="float | diagonal | levelled (or the full names)",
    )
    p.add_argument("--mode", choices=[m.value for m in SplitMode], default="truncate")


def _check_capacity(cfg: MmaConfig, k: int):
    limit = max_k(cfg)
    if k > limit:
        raise CapacityError(
            f"inner dimension k = {k} exceeds the maximum {limit} = 2^{limit.bit_length() - 1} "
            f"for I_{cfg.t_in} inputs and I_{cfg.t_acc} accumulators"
        )


def _metrics(C, A, B, exact) -> dict:
    return {
        "max_elementwise_error": max_elementwise_error(C, exact),
        "normwise_error": normwise_gemm_error(C, exact, A, B),
    }


def cmd_multiply(args) -> int:
    A, B = read_matrix(args.A), read_matrix(args.B)
    if A.shape[1] != B.shape[0]:
        raise ValueError(f"shape mismatch: A is {A.shape}, B is {B.shape}")
    cfg = _cfg(args)
    k = A.shape[1]
    _check_capacity(cfg, k)
    plan = make_plan(max(k, 1), cfg, args.sa, args.sb, args.schedule, parse_strategy(args.strategy), args.mode)
    t0 = time.perf_counter()
    C, diag = multiply(A, B, cfg, plan)
    elapsed = time.perf_counter() - t0
    write_matrix(args.out, C, args.format)
    rec = RunRecord("multiply", asdict(cfg), plan.to_dict(), diagnostics=diag.to_dict(), wall_time=elapsed)
    if args.exact or args.verify:
        exact = exact_gemm(A, B)
        rec.metrics = _metrics(C, A, B, exact)
        if args.exact_out:
            write_matrix(args.exact_out, exact.to_float(), args.format)
        if args.verify:
            again = _metrics(read_matrix(args.out), A, B, exact)
            if again != rec.metrics:
                print("verification failed: metrics differ after re-reading the output", file=sys.stderr)
                return EXIT_FAILED
            rec.metrics["verified"] = True
    _emit(rec, args.record)
    return EXIT_OK


def cmd_analyze(args) -> int:
    A, B = read_matrix(args.A), read_matrix(args.B)
    cfg = _cfg(args)
    k = A.shape[1]
    prof = ScalingProfile.of(A, B)
    out = {"kappa_A": prof.kappa_A, "kappa_B": prof.kappa_B, "zero_blocks": prof.zero_blocks}
    strategy = parse_strategy(args.strategy)
    plan_t = make_plan(max(k, 1), cfg, 1, 1, args.schedule, strategy).t
    sA, sB = args.sa, args.sb if args.sb is not None else args.sa
    status = EXIT_OK
    if args.auto:
        try:
            sA, sB = select_slices(
                prof.kappa_A,
                prof.kappa_B,
                plan_t,
                BINARY64.u,
                args.target,
                args.s_max,
                k=max(k, 1),
                cfg=cfg,
                schedule=args.schedule,
                strategy=strategy,
            )
            out["selected"] = {"s_A": sA, "s_B": sB}
        except InfeasibleSlices as e:
            out["infeasible"] = {"s_max": e.s_max, "gap": e.gap, "message": str(e)}
            status = EXIT_FAILED
    if status == EXIT_OK:
        plan = make_plan(max(k, 1), cfg, sA, sB, args.schedule, strategy, args.mode)
        rep = error_bound(A, B, plan)
        out["zeta"] = zeta(prof.kappa_A, prof.kappa_B, sA, sB, plan.t)
        out["bound"] = rep.to_dict()
        out["plan"] = plan.to_dict()
    rec = RunRecord("analyze", asdict(cfg), out.get("plan", {}), metrics=out)
    _emit(rec, args.record)
    return status


def cmd_experiment(args) -> int:
    cfg = _cfg(args)
    strategy = parse_strategy(args.strategy)
    t0 = time.perf_counter()
    seeds = range(args.seed, args.seed + args.seeds)
    if args.name == "inner":
        rows = ex.run_inner(
            ex.parse_sweep(args.phi or "0:10:100", float),
            ex.parse_sweep(args.s or "1:24"),
            seeds,
            cfg,
            args.schedule,
            strategy,
        )
    elif args.name == "matmul":
        rows = ex.run_matmul(
            ex.parse_sweep(args.phi or "{8,13}", float),
            ex.parse_sweep(args.k or "{16,64,256}"),
            ex.parse_sweep(args.s or "{2,4,6,8,10}"),
            args.seed,
            (strategy,),
            args.schedule,
            cfg,
        )
    elif args.name == "blocklu":
        mats = ["minij", "wilkinson", "hanowa", "randn", "randu"] if args.matrices in (None, "all") else args.matrices.split(",")
        rows = ex.run_blocklu(
            mats, ex.parse_pairs(args.s_grid or "{1,8}^2"), args.n or 500, args.block, args.seed, cfg, strategy
        )
    elif args.name == "kappad":
        rows = ex.run_kappad(
            ex.parse_sweep(args.kd or "{1e10,1e20}", float),
            ex.parse_sweep(args.s or "{8,12,16,18}"),
            args.n or 256,
            args.seed,
            not args.no_rotate,
            cfg,
            strategy,
            args.schedule,
        )
    else:  # argparse restricts the choices
        raise ValueError(f"unknown experiment {args.name!r}")
    elapsed = time.perf_counter() - t0

    if args.out:
        _write_csv(args.out + ".csv", rows)
    else:
        _write_csv(None, rows)
    rec = RunRecord(
        "experiment",
        asdict(cfg),
        genspec={"name": args.name, "seed": args.seed, "seeds": args.seeds},
        metrics={"rows": rows},
        wall_time=elapsed,
    )
    if args.out:
        with open(args.out + ".json", "w") as fh:
            fh.write(rec.to_json())
    return EXIT_OK


def _write_csv(path, rows):
    if not rows:
        return
    fh = open(path, "w", newline="") if path else sys.stdout
    try:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    finally:
        if path:
            fh.close()


def _emit(rec: RunRecord, path):
    text = rec.to_json()
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        print(text)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ozmul", description="Emulate binary64 GEMM with exact integer slice products.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    m = sub.add_parser("multiply", help="multiply two ozm1 matrix files")
    m.add_argument("A")
    m.add_argument("B")
    m.add_argument("-o", "--out", required=True, help="output ozm1 file")
    _add_mma_flags(m)
    _add_plan_flags(m)
    m.add_argument("--format", choices=["hex", "dec"], default="hex")
    m.add_argument("--exact", action="store_true", help="also compute the exact product and error metrics")
    m.add_argument("--exact-out", help="write the correctly rounded exact product here")
    m.add_argument("--verify", action="store_true", help="recompute metrics from the written output")
    m.add_argument("--record", help="write the run record (JSON) here instead of stdout")
    m.set_defaults(func=cmd_multiply)

    a = sub.add_parser("analyze", help="scaling measures, error bound and slice selection")
    a.add_argument("A")
    a.add_argument("B")
    _add_mma_flags(a)
    _add_plan_flags(a)
    a.add_argument("--auto", action="store_true", help="choose s_A, s_B by enumeration")
    a.add_argument("--target", type=float, default=None, help="accuracy target (default gamma_psi)")
    a.add_argument("--s-max", type=int, default=20)
    a.add_argument("--record")
    a.set_defaults(func=cmd_analyze)

    e = sub.add_parser("experiment", help="run an accuracy experiment and print a CSV table")
    e.add_argument("name", choices=["inner", "matmul", "blocklu", "kappad"])
    _add_mma_flags(e)
    e.add_argument("--phi", help="phi sweep, e.g. 0:10:100")
    e.add_argument("--s", help="slice sweep, e.g. 1:24 or {8,12}")
    e.add_argument("--k", help="inner dimension sweep (matmul)")
    e.add_argument("--kd", help="kappa_D sweep, e.g. {1e10,1e20}")
    e.add_argument("--n", type=int, help="matrix order (blocklu, kappad)")
    e.add_argument("--block", type=int, default=10)
    e.add_argument("--matrices", help="comma-separated names or 'all' (blocklu)")
    e.add_argument("--s-grid", help="slice pairs, {1,8}^2 or 8,1;1,8 (blocklu)")
    e.add_argument("--no-rotate", action="store_true", help="skip the row/column rotation (kappad)")
    e.add_argument("--schedule", choices=[s.value for s in Schedule], default="reduced")
    e.add_argument("--strategy", default="diagonal")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--seeds", type=int, default=100, help="number of seeds (inner)")
    e.add_argument("--out", help="output prefix: writes <prefix>.csv and <prefix>.json")
    e.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CapacityError as e:
        print(f"capacity error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, FormatError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
