"""Compiled inner loops for the iterative solvers.

Two kernel families implement the same rounding semantics as ``fparith``:

* native kernels operate on float32 or float64 arrays; every elementary
  operation is a hardware op in that precision (numba is compiled without
  fastmath, so there is no FMA contraction or reassociation);
* ``*_emu`` kernels operate on float64 arrays holding p-bit-representable
  values and round the significand after every operation.

Dot products accumulate left-to-right, matching ``fparith.fl_dot``, so a
Python-level reference step and a kernel step are bit-identical.
"""

import math

import numpy as np
from numba import njit


@njit(inline="always")
def _rnd(x, scale):
    # round float64 to a p-bit significand (scale = 2.0**p), ties to even
    if x == 0.0:
        return x
    m, e = math.frexp(x)
    return math.ldexp(np.rint(m * scale), e) / scale


# --- row squared norms ---

@njit(cache=True)
def row_sq_norms(A, out):
    m, n = A.shape
    for i in range(m):
        acc = A[i, 0] * A[i, 0]
        for j in range(1, n):
            acc += A[i, j] * A[i, j]
        out[i] = acc


@njit(cache=True)
def row_sq_norms_emu(A, out, scale):
    m, n = A.shape
    for i in range(m):
        acc = _rnd(A[i, 0] * A[i, 0], scale)
        for j in range(1, n):
            acc = _rnd(acc + _rnd(A[i, j] * A[i, j], scale), scale)
        out[i] = acc


# --- rounded matrix-vector product (row-wise left-to-right dots) ---

@njit(cache=True)
def matvec(A, x, out):
    m, n = A.shape
    for i in range(m):
        acc = A[i, 0] * x[0]
        for j in range(1, n):
            acc += A[i, j] * x[j]
        out[i] = acc


@njit(cache=True)
def matvec_emu(A, x, out, scale):
    m, n = A.shape
    for i in range(m):
        acc = _rnd(A[i, 0] * x[0], scale)
        for j in range(1, n):
            acc = _rnd(acc + _rnd(A[i, j] * x[j], scale), scale)
        out[i] = acc


# --- randomized Kaczmarz ---

@njit(cache=True)
def rk_chunk(A, b, rsn, x, idx):
    n = A.shape[1]
    for t in range(idx.shape[0]):
        i = idx[t]
        acc = A[i, 0] * x[0]
        for j in range(1, n):
            acc += A[i, j] * x[j]
        theta = (b[i] - acc) / rsn[i]
        for j in range(n):
            x[j] = theta * A[i, j] + x[j]


@njit(cache=True)
def rk_chunk_emu(A, b, rsn, x, idx, scale):
    n = A.shape[1]
    for t in range(idx.shape[0]):
        i = idx[t]
        acc = _rnd(A[i, 0] * x[0], scale)
        for j in range(1, n):
            acc = _rnd(acc + _rnd(A[i, j] * x[j], scale), scale)
        theta = _rnd(_rnd(b[i] - acc, scale) / rsn[i], scale)
        for j in range(n):
            x[j] = _rnd(_rnd(theta * A[i, j], scale) + x[j], scale)


# --- minimal-storage RK with iterative refinement ---
# x_base is frozen between refinements; e iterates on A e = b - A x_base with
# residual entries generated on the fly (8n + O(1) elementary ops per step).

@njit(cache=True)
def rk_ir_chunk(A, b, rsn, x_base, e, idx):
    n = A.shape[1]
    for t in range(idx.shape[0]):
        i = idx[t]
        acc = A[i, 0] * x_base[0]
        for j in range(1, n):
            acc += A[i, j] * x_base[j]
        r_i = b[i] - acc
        acc2 = A[i, 0] * e[0]
        for j in range(1, n):
            acc2 += A[i, j] * e[j]
        theta = (r_i - acc2) / rsn[i]
        for j in range(n):
            e[j] = theta * A[i, j] + e[j]


@njit(cache=True)
def rk_ir_chunk_emu(A, b, rsn, x_base, e, idx, scale):
    n = A.shape[1]
    for t in range(idx.shape[0]):
        i = idx[t]
        acc = _rnd(A[i, 0] * x_base[0], scale)
        for j in range(1, n):
            acc = _rnd(acc + _rnd(A[i, j] * x_base[j], scale), scale)
        r_i = _rnd(b[i] - acc, scale)
        acc2 = _rnd(A[i, 0] * e[0], scale)
        for j in range(1, n):
            acc2 = _rnd(acc2 + _rnd(A[i, j] * e[j], scale), scale)
        theta = _rnd(_rnd(r_i - acc2, scale) / rsn[i], scale)
        for j in range(n):
            e[j] = _rnd(_rnd(theta * A[i, j], scale) + e[j], scale)


# --- accelerated randomized Kaczmarz ---
# Scalars alpha, oma = 1 - alpha, beta, omb = 1 - beta, gamma are passed in
# already rounded into the working precision.  The v update is evaluated
# left-to-right: ((beta*v) + (omb*x)) - (gamma*w).

@njit(cache=True)
def ark_chunk(A, b, rrsn, v, y, alpha, oma, beta, omb, gamma, xk, w, idx):
    n = A.shape[1]
    for t in range(idx.shape[0]):
        i = idx[t]
        for j in range(n):
            xk[j] = alpha * v[j] + oma * y[j]
        acc = A[i, 0] * xk[0]
        for j in range(1, n):
            acc += A[i, j] * xk[j]
        theta = (acc - b[i]) / rrsn[i]
        for j in range(n):
            w[j] = theta * A[i, j]
            y[j] = xk[j] - w[j]
            v[j] = (beta * v[j] + omb * xk[j]) - gamma * w[j]


@njit(cache=True)
def ark_chunk_emu(A, b, rrsn, v, y, alpha, oma, beta, omb, gamma, xk, w, idx,
                  scale):
    n = A.shape[1]
    for t in range(idx.shape[0]):
        i = idx[t]
        for j in range(n):
            xk[j] = _rnd(_rnd(alpha * v[j], scale) + _rnd(oma * y[j], scale),
                         scale)
        acc = _rnd(A[i, 0] * xk[0], scale)
        for j in range(1, n):
            acc = _rnd(acc + _rnd(A[i, j] * xk[j], scale), scale)
        theta = _rnd(_rnd(acc - b[i], scale) / rrsn[i], scale)
        for j in range(n):
            w[j] = _rnd(theta * A[i, j], scale)
            y[j] = _rnd(xk[j] - w[j], scale)
            v[j] = _rnd(_rnd(_rnd(beta * v[j], scale)
                             + _rnd(omb * xk[j], scale), scale)
                        - _rnd(gamma * w[j], scale), scale)
