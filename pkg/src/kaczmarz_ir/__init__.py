"""Randomized Kaczmarz solvers under configurable floating-point precision.

The package provides plain and accelerated randomized Kaczmarz iterations,
uniform-precision iterative refinement around either, a configurable
floating-point model (hardware double, hardware single, or emulated p-bit
significands), synthetic test problems with prescribed Demmel condition
numbers, exact-arithmetic oracles, and an experiment harness with CSV error
traces.
"""

from .fparith import F32, F64, PrecisionMode, emulated
from .harness import ExperimentConfig, run_experiment, summarize
from .matgen import Problem, SpectrumSpec, generate
from .refine import RefineSchedule, refine_driver, refinement_count, \
    rk_ir_inline, run_ark_ir
from .solvers import ArkParams, RowSampler, ark_params, ark_params_for, \
    run_ark, run_rk
from .trace import ErrorTrace, emit_csv, parse_csv

__version__ = "0.1.0"

__all__ = [
    "F32", "F64", "PrecisionMode", "emulated",
    "ExperimentConfig", "run_experiment", "summarize",
    "Problem", "SpectrumSpec", "generate",
    "RefineSchedule", "refine_driver", "refinement_count",
    "rk_ir_inline", "run_ark_ir",
    "ArkParams", "RowSampler", "ark_params", "ark_params_for",
    "run_ark", "run_rk",
    "ErrorTrace", "emit_csv", "parse_csv",
]
