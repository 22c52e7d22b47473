"""Binary64 matrix multiplication emulated with exact integer slice products."""

from .analysis import ErrorReport, ScalingProfile, error_bound, gamma, kappa, select_slices, zeta
from .fpcore import BINARY64, FloatFormat, IntFormat, round_nearest, scale_factor
from .mma import CapacityError, MmaConfig, integer_gemm, max_k, optimal_slice_width
from .oracle import exact_gemm
from .scheme import Schedule, Strategy, chi, gemm, make_plan, multiply, plan_levels
from .slicing import SlicedMatrix, SplitMode, reconstruct, split_cols, split_rows

__version__ = "0.1.0"

__all__ = [
    "BINARY64",
    "CapacityError",
    "ErrorReport",
    "FloatFormat",
    "IntFormat",
    "MmaConfig",
    "ScalingProfile",
    "Schedule",
    "SlicedMatrix",
    "SplitMode",
    "Strategy",
    "chi",
    "error_bound",
    "exact_gemm",
    "gamma",
    "gemm",
    "integer_gemm",
    "kappa",
    "make_plan",
    "max_k",
    "multiply",
    "optimal_slice_width",
    "plan_levels",
    "reconstruct",
    "round_nearest",
    "scale_factor",
    "select_slices",
    "split_cols",
    "split_rows",
    "zeta",
]
