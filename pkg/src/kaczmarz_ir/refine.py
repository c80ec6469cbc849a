"""Uniform-precision iterative refinement.

Everything here runs in a single working precision: residuals are formed
with rounded working-precision arithmetic, never with extended
accumulation.  Two implementations are exposed:

* ``refine_driver`` -- the generic scheme x_{i+1} = x_i + Solver(b - A x_i)
  around any solver routine, with an explicit residual vector;
* ``rk_ir_inline`` -- the minimal-storage RK variant that keeps only the
  frozen solution x and the correction iterate e, generating residual
  entries on the fly (8n + O(1) elementary ops per step).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .fparith import PrecisionMode, fl_round
from .matgen import Problem
from .solvers import (ArkParams, RowSampler, _ark_scalars, _working,
                      _working_rsn, forward_error)
from .trace import ErrorTrace, trace_grid


@dataclass(frozen=True)
class RefineSchedule:
    """Inner-iteration budgets between refinements.

    ``segments[i]`` is the number of solver iterations in stage i; a
    refinement happens at each internal boundary, so ``t = len(segments) - 1``
    refinements are performed.
    """

    segments: tuple

    def __post_init__(self):
        if any(k < 1 for k in self.segments) or len(self.segments) == 0:
            raise ValueError("all segment budgets must be >= 1")

    @property
    def t(self) -> int:
        return len(self.segments) - 1

    @property
    def boundaries(self) -> tuple:
        """Cumulative iteration counts s_i at which refinements occur."""
        out, s = [], 0
        for k in self.segments[:-1]:
            s += k
            out.append(s)
        return tuple(out)

    @property
    def total_iters(self) -> int:
        return sum(self.segments)

    @classmethod
    def none(cls, iters: int) -> "RefineSchedule":
        return cls((iters,))

    @classmethod
    def halfway(cls, iters: int) -> "RefineSchedule":
        """One refinement initiated halfway through the run."""
        if iters < 2:
            raise ValueError("need at least 2 iterations")
        h = iters // 2
        return cls((h, iters - h))

    @classmethod
    def every(cls, iters: int, window: int) -> "RefineSchedule":
        """A refinement after each full window of iterations."""
        if window < 1:
            raise ValueError("window must be >= 1")
        full, rest = divmod(iters, window)
        segs = [window] * full
        if rest:
            segs.append(rest)
        if not segs:
            segs = [iters]
        return cls(tuple(segs))

    @classmethod
    def at_points(cls, points, iters: int) -> "RefineSchedule":
        """Refinements at the given (strictly increasing) iteration counts."""
        segs, prev = [], 0
        for s in points:
            if s <= prev or s >= iters:
                raise ValueError("refinement points must be strictly "
                                 "increasing and inside the run")
            segs.append(s - prev)
            prev = s
        segs.append(iters - prev)
        return cls(tuple(segs))

    def describe(self) -> str:
        return "+".join(str(k) for k in self.segments)


def rk_ir_step(x, e, A, b, rsn, i: int, mode: PrecisionMode):
    """One inline refinement step: residual entry generated on the fly.

    Reference implementation routed through ``fparith`` (bit-identical to
    the compiled kernel); returns the updated correction iterate e.
    """
    from .fparith import fl_axpy, fl_dot, fl_op
    if rsn[i] <= 0.0:
        raise ZeroDivisionError("zero row")
    r_i = fl_op(b[i], fl_dot(A[i], x, mode), "-", mode)
    theta = fl_op(fl_op(r_i, fl_dot(A[i], e, mode), "-", mode),
                  rsn[i], "/", mode)
    return fl_axpy(theta, A[i], e, mode)


def refinement_count(kappa: float, u: float) -> int:
    """Number of refinements needed for forward stability: log2(1/(kappa u)),
    rounded to the nearest integer and clamped to at least 1."""
    if kappa * u >= 1.0:
        raise ValueError("beyond stability regime")
    return max(1, round(math.log2(1.0 / (kappa * u))))


def _matvec_mode(Aw, x, mode: PrecisionMode):
    out = np.empty(Aw.shape[0], dtype=Aw.dtype)
    if mode.kind == "emu":
        kernels.matvec_emu(Aw, x, out, 2.0 ** mode.significand_bits)
    else:
        kernels.matvec(Aw, x, out)
    return out


def _sub_mode(a, b, mode: PrecisionMode):
    if mode.kind == "emu":
        from .fparith import _round_significand
        return _round_significand(np.asarray(a) - np.asarray(b),
                                  mode.significand_bits)
    return a - b


def _add_mode(a, b, mode: PrecisionMode):
    if mode.kind == "emu":
        from .fparith import _round_significand
        return _round_significand(np.asarray(a) + np.asarray(b),
                                  mode.significand_bits)
    return a + b


def refine_driver(solve, A, b, sched: RefineSchedule,
                  mode: PrecisionMode) -> np.ndarray:
    """Generic iterative refinement around a solver routine.

    ``solve(rhs, budget)`` approximately solves A z = rhs in working
    precision.  The residual is recomputed with a full (rounded,
    working-precision) matrix-vector product at every refinement.
    """
    Aw = np.asarray(A)
    x = np.asarray(solve(b, sched.segments[0]))
    for budget in sched.segments[1:]:
        if not np.all(np.isfinite(x)):
            raise ArithmeticError("solver diverged")
        r = _sub_mode(b, _matvec_mode(Aw, x, mode), mode)
        x = _add_mode(x, np.asarray(solve(r, budget)), mode)
    if not np.all(np.isfinite(x)):
        raise ArithmeticError("solver diverged")
    return x


def rk_ir_inline(problem: Problem, sched: RefineSchedule, mode: PrecisionMode,
                 seed, trace_points: int = 50,
                 exact_row_norms: bool = False) -> ErrorTrace:
    """Minimal-storage randomized Kaczmarz with iterative refinement.

    Stores exactly two n-vectors beyond the problem data: the frozen
    solution x and the correction iterate e.  With a single segment the
    update sequence (and hence the trace) is identical to ``run_rk``.
    """
    Aw, bw = _working(problem, mode)
    rsn = _working_rsn(Aw, mode, exact_row_norms)
    if np.any(rsn <= 0.0):
        raise ZeroDivisionError("zero row")
    sampler = RowSampler(problem.A, 0.0, seed)
    n = problem.n
    x = np.zeros(n, dtype=Aw.dtype)
    e = np.zeros(n, dtype=Aw.dtype)

    iters = sched.total_iters
    grid = trace_grid(iters, trace_points)
    stops = np.unique(np.concatenate(
        [grid, np.asarray(sched.boundaries, dtype=np.int64)]))
    boundaries = set(sched.boundaries)
    gridset = set(int(g) for g in grid)

    samples = [(0, forward_error(_add_mode(x, e, mode), problem.x_true))]
    pos = 0
    from .solvers import CHUNK
    for cp in stops[1:]:
        while pos < cp:
            step = min(int(cp) - pos, CHUNK)
            if mode.kind == "emu":
                kernels.rk_ir_chunk_emu(Aw, bw, rsn, x, e,
                                        sampler.sample_chunk(step),
                                        2.0 ** mode.significand_bits)
            else:
                kernels.rk_ir_chunk(Aw, bw, rsn, x, e,
                                    sampler.sample_chunk(step))
            pos += step
        if pos in gridset:
            samples.append((pos,
                            forward_error(_add_mode(x, e, mode),
                                          problem.x_true)))
        if pos in boundaries:
            x = np.asarray(_add_mode(x, e, mode), dtype=Aw.dtype)
            e[:] = 0.0
    meta = {"method": "rk-ir", "n": problem.n,
            "kappa_achieved": problem.kappa, "precision": mode.label,
            "seed": seed, "lambda": 0.0, "schedule": sched.describe()}
    return ErrorTrace(meta=meta, samples=samples)


def run_ark_ir(problem: Problem, params: ArkParams, sched: RefineSchedule,
               mode: PrecisionMode, seed, trace_points: int = 50,
               exact_row_norms: bool = False) -> ErrorTrace:
    """ARK with iterative refinement (explicit residual per refinement).

    The inner solver restarts with v = y = 0 on each residual system; the
    acceleration parameters are reused verbatim (the matrix is unchanged,
    so the formulas give identical values).
    """
    Aw, bw = _working(problem, mode)
    rsn = _working_rsn(Aw, mode, exact_row_norms)
    lam_w = fl_round(params.lam, mode)
    rrsn = np.asarray(fl_round(rsn.astype(np.float64) + lam_w, mode),
                      dtype=Aw.dtype)
    if np.any(rrsn <= 0.0):
        raise ZeroDivisionError("zero row")
    sampler = RowSampler(problem.A, params.lam, seed)
    n = problem.n
    dt = Aw.dtype.type
    alpha, oma, beta, omb, gamma = _ark_scalars(params, mode, dt)
    x_acc = np.zeros(n, dtype=Aw.dtype)
    rhs = bw.copy()
    v = np.zeros(n, dtype=Aw.dtype)
    y = np.zeros(n, dtype=Aw.dtype)
    xk = np.empty(n, dtype=Aw.dtype)
    w = np.empty(n, dtype=Aw.dtype)

    def combine():
        if mode.kind == "emu":
            from .fparith import _round_significand
            p = mode.significand_bits
            inner = _round_significand(
                _round_significand(alpha * v, p)
                + _round_significand(oma * y, p), p)
        else:
            inner = alpha * v + oma * y
        return np.asarray(_add_mode(x_acc, inner, mode), dtype=Aw.dtype)

    iters = sched.total_iters
    grid = trace_grid(iters, trace_points)
    stops = np.unique(np.concatenate(
        [grid, np.asarray(sched.boundaries, dtype=np.int64)]))
    boundaries = set(sched.boundaries)
    gridset = set(int(g) for g in grid)

    samples = [(0, forward_error(combine(), problem.x_true))]
    pos = 0
    from .solvers import CHUNK
    for cp in stops[1:]:
        while pos < cp:
            step = min(int(cp) - pos, CHUNK)
            idx = sampler.sample_chunk(step)
            if mode.kind == "emu":
                kernels.ark_chunk_emu(Aw, rhs, rrsn, v, y, alpha, oma, beta,
                                      omb, gamma, xk, w, idx,
                                      2.0 ** mode.significand_bits)
            else:
                kernels.ark_chunk(Aw, rhs, rrsn, v, y, alpha, oma, beta, omb,
                                  gamma, xk, w, idx)
            pos += step
        if pos in gridset:
            samples.append((pos, forward_error(combine(), problem.x_true)))
        if pos in boundaries:
            x_acc = combine()
            if not np.all(np.isfinite(x_acc)):
                raise ArithmeticError("solver diverged")
            rhs = np.asarray(
                _sub_mode(bw, _matvec_mode(Aw, x_acc, mode), mode),
                dtype=Aw.dtype)
            v[:] = 0.0
            y[:] = 0.0
    meta = {"method": "ark-ir", "n": problem.n,
            "kappa_achieved": problem.kappa, "precision": mode.label,
            "seed": seed, "lambda": params.lam, "schedule": sched.describe()}
    return ErrorTrace(meta=meta, samples=samples)
