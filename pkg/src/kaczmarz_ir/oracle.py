"""Ground-truth machinery.

* Exact rational-arithmetic replays of RK and ARK, with and without
  iterative refinement, used to check that refinement changes nothing in
  exact arithmetic (it is pure bookkeeping).
* Brute-force computation of the ideal acceleration parameters mu and nu
  from the regularized projection matrices, via a cyclic Jacobi
  eigensolver (independent of the closed-form route used by the solvers).
* The ARK Lyapunov diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numba import njit

# --- exact rational iterations -------------------------------------------

def to_rational_matrix(A):
    return [[Fraction(int(v)) if float(v).is_integer() else Fraction(v)
             for v in row] for row in np.asarray(A).tolist()]


def to_rational_vector(b):
    return [Fraction(int(v)) if float(v).is_integer() else Fraction(v)
            for v in np.asarray(b).tolist()]


def _dot(a, x):
    return sum(ai * xi for ai, xi in zip(a, x))


def _axpy(t, a, x):
    return [xi + t * ai for ai, xi in zip(a, x)]


def rk_exact(A, b, x0, seq):
    """Exact Kaczmarz iterates following a fixed index sequence.

    Returns the list [x_0, x_1, ..., x_K] of exact rational iterates.
    """
    n = len(A)
    x = list(x0)
    iterates = [x]
    for i in seq:
        if not 0 <= i < n:
            raise IndexError("row index out of range")
        a = A[i]
        den = _dot(a, a)
        if den == 0:
            raise ZeroDivisionError("division by zero")
        theta = (b[i] - _dot(a, x)) / den
        x = _axpy(theta, a, x)
        iterates.append(x)
    return iterates


def rk_ir_exact(A, b, x0, seq, segments):
    """Exact iterates of the Kaczmarz refinement scheme.

    The correction iterate e solves A e = b - A x_base; at each refinement
    boundary x_base absorbs e.  Reported iterates are x_base + e, which
    must coincide exactly with ``rk_exact`` under the same index sequence.
    """
    if sum(segments) != len(seq):
        raise ValueError("segments must sum to the sequence length")
    n = len(A)
    x_base = [Fraction(0)] * n
    e = list(x0)
    rhs = list(b)
    iterates = [[xb + ei for xb, ei in zip(x_base, e)]]
    pos = 0
    for si, seg in enumerate(segments):
        for i in seq[pos:pos + seg]:
            a = A[i]
            den = _dot(a, a)
            if den == 0:
                raise ZeroDivisionError("division by zero")
            theta = (rhs[i] - _dot(a, e)) / den
            e = _axpy(theta, a, e)
            iterates.append([xb + ei for xb, ei in zip(x_base, e)])
        pos += seg
        if si < len(segments) - 1:
            x_base = [xb + ei for xb, ei in zip(x_base, e)]
            e = [Fraction(0)] * n
            rhs = [bi - _dot(Ai, x_base) for bi, Ai in zip(b, A)]
    return iterates


@dataclass(frozen=True)
class ExactArkParams:
    """Rational-compatible acceleration parameters.

    mu = s p^2 and nu = s q^2 for rationals s, p, q, so that sqrt(mu/nu)
    and sqrt(mu nu) are rational and beta, gamma, alpha are exact.
    """

    lam: Fraction
    mu: Fraction
    nu: Fraction
    beta: Fraction
    gamma: Fraction
    alpha: Fraction

    @classmethod
    def from_spq(cls, s, p, q, lam=Fraction(0)) -> "ExactArkParams":
        s, p, q, lam = Fraction(s), Fraction(p), Fraction(q), Fraction(lam)
        if s <= 0 or p <= 0 or q < p:
            raise ValueError("irrational parameters")
        mu = s * p * p
        nu = s * q * q
        beta = 1 - p / q
        gamma = 1 / (s * p * q)
        alpha = 1 / (1 + gamma * nu)
        return cls(lam=lam, mu=mu, nu=nu, beta=beta, gamma=gamma, alpha=alpha)


def ark_exact(A, b, x0, seq, params: ExactArkParams):
    """Exact ARK iterates (block size 1) following a fixed index sequence.

    Returns dict with lists 'x' (length K), 'w' (length K), 'y', 'v'
    (length K+1, including the initial values).
    """
    n = len(A)
    al, be, ga, lam = params.alpha, params.beta, params.gamma, params.lam
    v = list(x0)
    y = list(x0)
    out = {"x": [], "w": [], "y": [list(y)], "v": [list(v)]}
    for i in seq:
        a = A[i]
        den = _dot(a, a) + lam
        if den == 0:
            raise ZeroDivisionError("division by zero")
        x = [al * vj + (1 - al) * yj for vj, yj in zip(v, y)]
        theta = (_dot(a, x) - b[i]) / den
        w = [theta * aj for aj in a]
        y = [xj - wj for xj, wj in zip(x, w)]
        v = [be * vj + (1 - be) * xj - ga * wj
             for vj, xj, wj in zip(v, x, w)]
        out["x"].append(x)
        out["w"].append(w)
        out["y"].append(list(y))
        out["v"].append(list(v))
    return out


def ark_ir_exact(A, b, x0, seq, params: ExactArkParams, segments):
    """Exact ARK-with-refinement iterates, reported in combined form.

    The refinement is pure bookkeeping: at each boundary the combined
    solution estimate x is absorbed into a single offset shared by the x,
    y, and v sequences, the momentum state is re-expressed relative to it
    (v <- v - x, y <- y - x), and the inner solve continues on the residual
    system A z = b - A x.  The combined iterates must equal ``ark_exact``
    elementwise; w carries no offset.
    """
    if sum(segments) != len(seq):
        raise ValueError("segments must sum to the sequence length")
    n = len(A)
    al, be, ga, lam = params.alpha, params.beta, params.gamma, params.lam
    x_off = [Fraction(0)] * n
    v_in, y_in = list(x0), list(x0)
    rhs = list(b)
    out = {"x": [], "w": [],
           "y": [[o + c for o, c in zip(x_off, y_in)]],
           "v": [[o + c for o, c in zip(x_off, v_in)]]}
    pos = 0
    for si, seg in enumerate(segments):
        for i in seq[pos:pos + seg]:
            a = A[i]
            den = _dot(a, a) + lam
            x = [al * vj + (1 - al) * yj for vj, yj in zip(v_in, y_in)]
            theta = (_dot(a, x) - rhs[i]) / den
            w = [theta * aj for aj in a]
            y_in = [xj - wj for xj, wj in zip(x, w)]
            v_in = [be * vj + (1 - be) * xj - ga * wj
                    for vj, xj, wj in zip(v_in, x, w)]
            out["x"].append([o + c for o, c in zip(x_off, x)])
            out["w"].append(list(w))
            out["y"].append([o + c for o, c in zip(x_off, y_in)])
            out["v"].append([o + c for o, c in zip(x_off, v_in)])
        pos += seg
        if si < len(segments) - 1:
            x_end = [al * vj + (1 - al) * yj for vj, yj in zip(v_in, y_in)]
            x_off = [o + c for o, c in zip(x_off, x_end)]
            v_in = [vj - xj for vj, xj in zip(v_in, x_end)]
            y_in = [yj - xj for yj, xj in zip(y_in, x_end)]
            rhs = [bi - _dot(Ai, x_off) for bi, Ai in zip(b, A)]
    return out


# --- brute-force mu / nu --------------------------------------------------

@njit(cache=True)
def _jacobi(S, tol, max_sweeps):
    """Cyclic Jacobi for a symmetric matrix; returns (eigvals, V, ok)."""
    n = S.shape[0]
    A = S.copy()
    V = np.eye(n)
    ok = False
    for _ in range(max_sweeps):
        off = 0.0
        for i in range(n - 1):
            for j in range(i + 1, n):
                off += A[i, j] * A[i, j]
        if np.sqrt(2.0 * off) <= tol:
            ok = True
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                for k in range(n):
                    akp = A[k, p]
                    akq = A[k, q]
                    A[k, p] = c * akp - s * akq
                    A[k, q] = s * akp + c * akq
                for k in range(n):
                    akp = A[p, k]
                    akq = A[q, k]
                    A[p, k] = c * akp - s * akq
                    A[q, k] = s * akp + c * akq
                for k in range(n):
                    vkp = V[k, p]
                    vkq = V[k, q]
                    V[k, p] = c * vkp - s * vkq
                    V[k, q] = s * vkp + c * vkq
    return np.diag(A).copy(), V, ok


@njit(cache=True)
def _hestenes(G, V, tol, max_sweeps):
    """One-sided Jacobi: orthogonalize the columns of G in place,
    accumulating the right rotations in V; returns True on convergence.

    The pairwise stopping test is relative (|g_p . g_q| against
    ||g_p|| ||g_q||), which is what gives the singular values high
    RELATIVE accuracy even when they are tiny -- unlike any method that
    forms G^T G explicitly."""
    n = G.shape[1]
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = 0.0
                beta = 0.0
                gam = 0.0
                for k in range(G.shape[0]):
                    alpha += G[k, p] * G[k, p]
                    beta += G[k, q] * G[k, q]
                    gam += G[k, p] * G[k, q]
                denom = np.sqrt(alpha * beta)
                if denom == 0.0 or abs(gam) <= tol * denom:
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gam)
                if zeta >= 0.0:
                    t = 1.0 / (zeta + np.sqrt(1.0 + zeta * zeta))
                else:
                    t = -1.0 / (-zeta + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                for k in range(G.shape[0]):
                    gkp = G[k, p]
                    gkq = G[k, q]
                    G[k, p] = c * gkp - s * gkq
                    G[k, q] = s * gkp + c * gkq
                for k in range(n):
                    vkp = V[k, p]
                    vkq = V[k, q]
                    V[k, p] = c * vkp - s * vkq
                    V[k, q] = s * vkp + c * vkq
        if not rotated:
            return True
    return False


def jacobi_svd(A, tol: float = 1e-15, max_sweeps: int = 60):
    """Singular values (descending) and right singular vectors of A by
    one-sided Jacobi, with high relative accuracy for small values."""
    G = np.asarray(A, dtype=np.float64).copy()
    n = G.shape[1]
    V = np.eye(n)
    if not _hestenes(G, V, tol, max_sweeps):
        raise RuntimeError("eigensolver failed")
    sigma = np.sqrt(np.sum(G * G, axis=0))
    order = np.argsort(sigma)[::-1]
    return sigma[order], V[:, order]


def jacobi_eigh(S, tol_factor: float = 1e-12, max_sweeps: int = 60):
    """Symmetric eigendecomposition by cyclic Jacobi rotations."""
    S = np.asarray(S, dtype=np.float64)
    scale = np.linalg.norm(S)
    tol = tol_factor * max(scale, 1e-300)
    w, V, ok = _jacobi(S, tol, max_sweeps)
    if not ok:
        raise RuntimeError("eigensolver failed")
    order = np.argsort(w)
    return w[order], V[:, order]


def mu_nu_bruteforce(A, lam: float):
    """Ideal acceleration parameters from the regularized projections.

    mu is the smallest positive eigenvalue of Pbar = A^T A / (||A||_F^2 +
    n lam); nu is the largest eigenvalue of the expected squared whitened
    projection, assembled row by row.
    """
    A = np.asarray(A, dtype=np.float64)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    rsn = np.linalg.norm(A, axis=1) ** 2
    f_i = rsn + lam
    f = float(np.sum(f_i))

    # Pbar = A^T A / f, diagonalized through the one-sided Jacobi SVD of A
    # itself: forming A^T A explicitly would perturb the smallest eigenvalue
    # by ~eps ||A||^2 in absolute terms, destroying its relative accuracy
    # for ill-conditioned inputs
    sigma, V = jacobi_svd(A)
    if sigma[-1] <= 1e-14 * sigma[0]:
        raise ZeroDivisionError("singular")
    mu = float(sigma[-1] ** 2 / f)

    # Pbar^{-1/2}-whitened rows: B a_i with B = sqrt(f) V diag(1/sigma) V^T
    B = np.sqrt(f) * (V / sigma) @ V.T
    Wr = A @ B  # row i is (Pbar^{-1/2} a_i)^T
    coeff = (f_i / f) * (np.sum(Wr * Wr, axis=1) / f_i ** 2)
    M = (Wr.T * coeff) @ Wr
    wM, _ = jacobi_eigh(M)
    nu = float(wM[-1])
    return mu, nu


def pbar_pinv(A, lam: float) -> np.ndarray:
    """Inverse of the expected regularized projection, full precision."""
    A = np.asarray(A, dtype=np.float64)
    f = float(np.linalg.norm(A) ** 2 + A.shape[0] * lam)
    return np.linalg.inv(A.T @ A) * f


def ark_lyapunov(v, y, x_true, mu_t: float, Pbar_pinv) -> float:
    """Lyapunov value: ||v - x||^2 in the Pbar-pseudoinverse norm plus
    ||y - x||^2 / mu_t, measured in full precision."""
    v = np.asarray(v, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x_true, dtype=np.float64)
    if v.shape != x.shape or y.shape != x.shape:
        raise ValueError("dimension mismatch")
    dv = v - x
    dy = y - x
    return float(dv @ (Pbar_pinv @ dv) + (dy @ dy) / mu_t)
