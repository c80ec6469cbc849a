"""Dense kernels: Householder QR, Haar sampling, GEPP baseline, condition
number utilities, and the KZMAT1 on-disk matrix format.

Norms used for *measuring* errors are always computed in full double
precision; only the direct-solve baseline ``ge_solve`` runs under a
simulated precision.
"""

from __future__ import annotations

import struct

import numpy as np

from . import kernels
from .fparith import F64, PrecisionMode, fl_round

MAGIC = b"KZMAT1"


def frobenius_norm(A) -> float:
    return float(np.linalg.norm(np.asarray(A, dtype=np.float64)))


def row_sq_norms(A, mode: PrecisionMode) -> np.ndarray:
    """Per-row squared norms, fl-accumulated left-to-right in ``mode``."""
    A = np.asarray(A, dtype=np.float64)
    if mode.kind == "f32":
        Aw = A.astype(np.float32)
        out = np.empty(A.shape[0], dtype=np.float32)
        kernels.row_sq_norms(Aw, out)
        return out.astype(np.float64)
    out = np.empty(A.shape[0], dtype=np.float64)
    if mode.kind == "emu":
        Aw = fl_round(A, mode)
        kernels.row_sq_norms_emu(Aw, out, 2.0 ** mode.significand_bits)
    else:
        kernels.row_sq_norms(A, out)
    return out


def householder_qr(M):
    """Householder QR of a square matrix, in full double precision.

    Returns (Q, R) with Q orthogonal and R upper triangular.
    """
    M = np.asarray(M, dtype=np.float64)
    n = M.shape[0]
    if M.shape != (n, n):
        raise ValueError("matrix must be square")
    R = M.copy()
    Q = np.eye(n)
    for k in range(n - 1):
        col = R[k:, k]
        normx = np.linalg.norm(col)
        if normx == 0.0:
            continue
        v = col.copy()
        v[0] += np.copysign(normx, col[0] if col[0] != 0.0 else 1.0)
        v /= np.linalg.norm(v)
        R[k:, k:] -= 2.0 * np.outer(v, v @ R[k:, k:])
        Q[:, k:] -= 2.0 * np.outer(Q[:, k:] @ v, v)
    return Q, R


def haar_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix.

    QR of a standard Gaussian matrix with the sign convention diag(R) > 0,
    which yields Haar measure.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    G = rng.standard_normal((n, n))
    Q, R = householder_qr(G)
    d = np.sign(np.diag(R))
    d[d == 0.0] = 1.0
    return Q * d


def ge_solve(A, b, mode: PrecisionMode = F64) -> np.ndarray:
    """Gaussian elimination with partial pivoting under the given precision.

    Every elementary operation is rounded once in ``mode``; this is the
    direct-solve baseline the iterative methods are compared against.
    """
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n = A.shape[0]
    if A.shape != (n, n) or b.shape != (n,):
        raise ValueError("dimension mismatch")
    if mode.kind == "f32":
        U = A.astype(np.float32)
        y = b.astype(np.float32)
        rnd = lambda z: z  # noqa: E731 - float32 ops round natively
    elif mode.kind == "emu":
        p = mode.significand_bits
        rnd = lambda z: np.ldexp(  # noqa: E731
            np.rint(np.frexp(z)[0] * 2.0 ** p), np.frexp(z)[1] - p)
        U = rnd(A.copy())
        y = rnd(b.copy())
    else:
        U = A.copy()
        y = b.copy()
        rnd = lambda z: z  # noqa: E731

    for k in range(n - 1):
        p_ = k + int(np.argmax(np.abs(U[k:, k])))
        if U[p_, k] == 0.0:
            raise ZeroDivisionError("numerically singular")
        if p_ != k:
            U[[k, p_]] = U[[p_, k]]
            y[[k, p_]] = y[[p_, k]]
        m = rnd(U[k + 1:, k] / U[k, k])
        U[k + 1:, k + 1:] = rnd(U[k + 1:, k + 1:] - rnd(m[:, None] * U[k, k + 1:][None, :]))
        y[k + 1:] = rnd(y[k + 1:] - rnd(m * y[k]))
        U[k + 1:, k] = 0.0
    if U[n - 1, n - 1] == 0.0:
        raise ZeroDivisionError("numerically singular")

    x = np.zeros(n, dtype=U.dtype)
    for i in range(n - 1, -1, -1):
        acc = y[i]
        for j in range(i + 1, n):
            acc = rnd(acc - rnd(U[i, j] * x[j]))
        x[i] = rnd(acc / U[i, i])
    return x.astype(np.float64)


def demmel_condition(sigma) -> float:
    """sqrt(sum sigma_k^2) / sigma_n for a decreasing positive spectrum."""
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.size == 0 or np.any(sigma <= 0.0):
        raise ValueError("invalid spectrum")
    if np.any(np.diff(sigma) > 0.0):
        raise ValueError("invalid spectrum")
    return float(np.linalg.norm(sigma) / sigma[-1])


def smallest_singular_value(A, tol: float = 1e-13, max_iter: int = 10000) -> float:
    """Smallest singular value via inverse power iteration on A^T A.

    Full-precision; the Rayleigh quotient estimate converges well past the
    documented 1e-6 relative accuracy on generic matrices.
    """
    A = np.asarray(A, dtype=np.float64)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    AtA = A.T @ A
    try:
        import scipy.linalg as sla
        lu = sla.lu_factor(AtA)
        solve = lambda w: sla.lu_solve(lu, w)  # noqa: E731
    except ImportError:  # pragma: no cover
        solve = lambda w: np.linalg.solve(AtA, w)  # noqa: E731
    v = np.ones(n) / np.sqrt(n)
    lam = float(v @ (AtA @ v))
    # the Rayleigh quotient cannot settle below the rounding noise of the
    # quadratic form, which is on the order of eps * ||A^T A||
    floor = 8.0 * np.finfo(np.float64).eps * float(np.linalg.norm(AtA))
    for _ in range(max_iter):
        w = solve(v)
        nw = np.linalg.norm(w)
        if not np.isfinite(nw) or nw == 0.0:
            raise ZeroDivisionError("numerically singular")
        v = w / nw
        new = float(v @ (AtA @ v))
        if abs(new - lam) <= max(tol * abs(new), floor):
            lam = new
            break
        lam = new
    else:
        raise RuntimeError("did not converge")
    # evaluate sigma through ||A v|| rather than the Rayleigh quotient of
    # A^T A: the direction error of v enters only quadratically, so this
    # estimate is accurate to ~eps * sqrt(n) * kappa instead of eps * kappa^2
    return float(np.linalg.norm(A @ v))


# --- KZMAT1 binary persistence ---

def save_matrix(A, path):
    A = np.ascontiguousarray(A, dtype=np.float64)
    m, n = A.shape
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<qq", m, n))
        f.write(A.tobytes())


def load_matrix(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic = f.read(6)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a KZMAT1 file")
        m, n = struct.unpack("<qq", f.read(16))
        data = np.frombuffer(f.read(8 * m * n), dtype="<f8")
    if data.size != m * n:
        raise ValueError(f"{path}: truncated KZMAT1 file")
    return data.reshape(m, n).copy()
