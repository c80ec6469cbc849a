"""Randomized Kaczmarz and accelerated randomized Kaczmarz.

Row sampling is exact (built in full precision, driven by a seeded
generator); all per-iteration linear algebra runs under the configured
precision.  ``rk_step``/``ark_step`` are single-step reference
implementations routed through ``fparith``; ``run_rk``/``run_ark`` drive the
compiled kernels in chunks between trace checkpoints and are bit-identical
to repeating the reference step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels, linalg
from .fparith import PrecisionMode, fl_axpy, fl_dot, fl_op, fl_round
from .matgen import Problem
from .trace import ErrorTrace, trace_grid

CHUNK = 1 << 21


class RowSampler:
    """Weighted row sampling with weights ||a_i||^2 + lambda.

    The cumulative table is built in full precision; the index sequence is
    deterministic given the seed.
    """

    def __init__(self, A, lam: float = 0.0, seed=0):
        w = np.linalg.norm(np.asarray(A, dtype=np.float64), axis=1) ** 2 + lam
        total = w.sum()
        if total <= 0.0:
            raise ValueError("degenerate sampler")
        if lam == 0.0 and np.any(w == 0.0):
            raise ValueError("zero row needs lambda > 0")
        self.weights = w
        self._cum = np.cumsum(w) / total
        self._cum[-1] = 1.0
        self._rng = np.random.default_rng(seed)

    def sample(self) -> int:
        return int(np.searchsorted(self._cum, self._rng.random(), side="right"))

    def sample_chunk(self, k: int) -> np.ndarray:
        return np.searchsorted(self._cum, self._rng.random(k), side="right")


def sample_row(sampler: RowSampler) -> int:
    return sampler.sample()


# --- single-step reference implementations ---

def rk_step(x, A, b, rsn, i: int, mode: PrecisionMode):
    """One randomized Kaczmarz projection onto equation i."""
    if rsn[i] <= 0.0:
        raise ZeroDivisionError("zero row")
    resid = fl_op(b[i], fl_dot(A[i], x, mode), "-", mode)
    theta = fl_op(resid, rsn[i], "/", mode)
    return fl_axpy(theta, A[i], x, mode)


@dataclass(frozen=True)
class ArkParams:
    """Momentum parameters; derived scalars are exact given mu_t, nu_t."""

    lam: float
    mu_t: float
    nu_t: float
    beta: float
    gamma: float
    alpha: float

    @classmethod
    def from_mu_nu(cls, mu_t: float, nu_t: float, lam: float) -> "ArkParams":
        if not (0.0 < mu_t <= nu_t):
            raise ValueError("need 0 < mu_t <= nu_t")
        beta = 1.0 - math.sqrt(mu_t / nu_t)
        gamma = 1.0 / math.sqrt(mu_t * nu_t)
        alpha = 1.0 / (1.0 + gamma * nu_t)
        return cls(lam=lam, mu_t=mu_t, nu_t=nu_t, beta=beta, gamma=gamma,
                   alpha=alpha)


def ark_params(frob_sq: float, n: int, sigma_min: float, min_row_sq: float,
               lam: float) -> ArkParams:
    """Acceleration parameters from the closed-form mu/nu bounds."""
    if sigma_min <= 0.0:
        raise ValueError("singular matrix")
    if frob_sq <= 0.0 or min_row_sq + lam <= 0.0 or lam < 0.0:
        raise ValueError("invalid parameter inputs")
    f = frob_sq + n * lam
    mu_t = sigma_min ** 2 / f
    nu_t = f / (min_row_sq + lam)
    return ArkParams.from_mu_nu(mu_t, nu_t, lam)


def ark_params_for(problem: Problem, lam: float) -> ArkParams:
    A = problem.A
    sigma_min = (float(problem.sigma[-1]) if problem.sigma is not None
                 else linalg.smallest_singular_value(A))
    rsn = np.linalg.norm(A, axis=1) ** 2
    return ark_params(linalg.frobenius_norm(A) ** 2, A.shape[0], sigma_min,
                      float(rsn.min()), lam)


def ark_step(v, y, A, b, p: ArkParams, reg_rsn, i: int, mode: PrecisionMode):
    """One accelerated Kaczmarz update; returns (v_next, y_next, x_k)."""
    alpha = fl_round(p.alpha, mode)
    oma = fl_round(1.0 - p.alpha, mode)
    beta = fl_round(p.beta, mode)
    omb = fl_round(1.0 - p.beta, mode)
    gamma = fl_round(p.gamma, mode)
    n = len(y)
    xk = np.empty(n)
    for j in range(n):
        xk[j] = fl_op(fl_op(alpha, v[j], "*", mode),
                      fl_op(oma, y[j], "*", mode), "+", mode)
    theta = fl_op(fl_op(fl_dot(A[i], xk, mode), b[i], "-", mode),
                  reg_rsn[i], "/", mode)
    w = np.empty(n)
    y_next = np.empty(n)
    v_next = np.empty(n)
    for j in range(n):
        w[j] = fl_op(theta, A[i, j], "*", mode)
        y_next[j] = fl_op(xk[j], w[j], "-", mode)
        v_next[j] = fl_op(fl_op(fl_op(beta, v[j], "*", mode),
                                fl_op(omb, xk[j], "*", mode), "+", mode),
                          fl_op(gamma, w[j], "*", mode), "-", mode)
    return v_next, y_next, xk


# --- full runs (compiled kernels, chunked between checkpoints) ---

def _working(problem: Problem, mode: PrecisionMode):
    """Round A and b into the working representation for the kernels."""
    if mode.kind == "f32":
        return problem.A.astype(np.float32), problem.b.astype(np.float32)
    if mode.kind == "emu":
        return (np.asarray(fl_round(problem.A, mode)),
                np.asarray(fl_round(problem.b, mode)))
    return problem.A.copy(), problem.b.copy()


def _working_rsn(Aw, mode: PrecisionMode, exact: bool = False):
    """Row squared norms: fl-accumulated by default, or computed in full
    precision and rounded once (``exact=True``)."""
    if exact:
        full = np.linalg.norm(np.asarray(Aw, dtype=np.float64), axis=1) ** 2
        out = np.asarray(fl_round(full, mode))
        return out.astype(Aw.dtype)
    out = np.empty(Aw.shape[0], dtype=Aw.dtype)
    if mode.kind == "emu":
        kernels.row_sq_norms_emu(Aw, out, 2.0 ** mode.significand_bits)
    else:
        kernels.row_sq_norms(Aw, out)
    return out


def forward_error(x, x_true) -> float:
    """Relative forward error, always measured in full double precision."""
    x = np.asarray(x, dtype=np.float64)
    return float(np.linalg.norm(x - x_true) / np.linalg.norm(x_true))


def _rk_apply(Aw, bw, rsn, x, idx, mode):
    if mode.kind == "emu":
        kernels.rk_chunk_emu(Aw, bw, rsn, x, idx, 2.0 ** mode.significand_bits)
    else:
        kernels.rk_chunk(Aw, bw, rsn, x, idx)


def run_rk(problem: Problem, iters: int, mode: PrecisionMode, seed,
           trace_points: int = 50, exact_row_norms: bool = False) -> ErrorTrace:
    """Randomized Kaczmarz from x_0 = 0, tracing the forward error."""
    Aw, bw = _working(problem, mode)
    rsn = _working_rsn(Aw, mode, exact_row_norms)
    if np.any(rsn <= 0.0):
        raise ZeroDivisionError("zero row")
    sampler = RowSampler(problem.A, 0.0, seed)
    x = np.zeros(problem.n, dtype=Aw.dtype)
    grid = trace_grid(iters, trace_points)
    samples = [(0, forward_error(x, problem.x_true))]
    pos = 0
    for cp in grid[1:]:
        while pos < cp:
            step = min(int(cp) - pos, CHUNK)
            _rk_apply(Aw, bw, rsn, x, sampler.sample_chunk(step), mode)
            pos += step
        samples.append((pos, forward_error(x, problem.x_true)))
    if not np.all(np.isfinite(x)):
        raise OverflowError("overflow")
    meta = {"method": "rk", "n": problem.n, "kappa_achieved": problem.kappa,
            "precision": mode.label, "seed": seed, "lambda": 0.0}
    return ErrorTrace(meta=meta, samples=samples)


def _ark_scalars(params: ArkParams, mode: PrecisionMode, dtype):
    """Round the derived scalars once into working precision."""
    vals = [params.alpha, 1.0 - params.alpha, params.beta, 1.0 - params.beta,
            params.gamma]
    return [dtype(fl_round(v, mode)) for v in vals]


def run_ark(problem: Problem, iters: int, params: ArkParams,
            mode: PrecisionMode, seed, trace_points: int = 50,
            state_hook=None, exact_row_norms: bool = False) -> ErrorTrace:
    """Accelerated randomized Kaczmarz from v_0 = y_0 = 0.

    The traced error is that of x_k = alpha v_k + (1 - alpha) y_k, computed
    in working precision.  ``state_hook(k, v, y)``, if given, is called with
    copies of the auxiliary iterates at every checkpoint.
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
    v = np.zeros(n, dtype=Aw.dtype)
    y = np.zeros(n, dtype=Aw.dtype)
    xk = np.empty(n, dtype=Aw.dtype)
    w = np.empty(n, dtype=Aw.dtype)

    def combine():
        # x_k = alpha v + (1 - alpha) y in working precision
        if mode.kind == "emu":
            p = mode.significand_bits
            from .fparith import _round_significand
            return _round_significand(
                _round_significand(alpha * v, p)
                + _round_significand(oma * y, p), p)
        return alpha * v + oma * y

    grid = trace_grid(iters, trace_points)
    samples = [(0, forward_error(combine(), problem.x_true))]
    if state_hook is not None:
        state_hook(0, v.copy(), y.copy())
    pos = 0
    for cp in grid[1:]:
        while pos < cp:
            step = min(int(cp) - pos, CHUNK)
            idx = sampler.sample_chunk(step)
            if mode.kind == "emu":
                kernels.ark_chunk_emu(Aw, bw, rrsn, v, y, alpha, oma, beta,
                                      omb, gamma, xk, w, idx,
                                      2.0 ** mode.significand_bits)
            else:
                kernels.ark_chunk(Aw, bw, rrsn, v, y, alpha, oma, beta, omb,
                                  gamma, xk, w, idx)
            pos += step
        samples.append((pos, forward_error(combine(), problem.x_true)))
        if state_hook is not None:
            state_hook(pos, v.copy(), y.copy())
    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(y))):
        raise OverflowError("overflow")
    meta = {"method": "ark", "n": problem.n, "kappa_achieved": problem.kappa,
            "precision": mode.label, "seed": seed, "lambda": params.lam}
    return ErrorTrace(meta=meta, samples=samples)
