"""Synthetic test problems: prescribed singular-value distributions with
Haar-random singular vectors and a target Demmel condition number.

Spectrum families (decreasing, positive):

* exp        sigma_k = exp(-beta (k-1))
* poly       sigma_k = k^(-alpha)
* harmonic   sigma_k = (1 + alpha (k-1))^(-1)
* highrank   linear decay from 1 to sigma_min over the first floor(0.9 n)
             entries, then constant sigma_min

In each family the Demmel condition number is strictly monotone in the free
parameter, so bisection on the parameter hits the target.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import linalg
from .fparith import PrecisionMode, fl_round

KINDS = ("exp", "poly", "highrank", "harmonic")

BISECT_TOL = 1e-9
BISECT_MAX_STEPS = 200


@dataclass(frozen=True)
class SpectrumSpec:
    kind: str
    n: int
    target_kappa: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown spectrum kind {self.kind!r}")
        if self.n < 2:
            raise ValueError("n must be >= 2")
        # kappa(A) >= sqrt(n) for every matrix
        if self.target_kappa < np.sqrt(self.n) * (1.0 - 1e-12):
            raise ValueError("unreachable condition number")


@dataclass
class Problem:
    A: np.ndarray
    b: np.ndarray
    x_true: np.ndarray
    sigma: Optional[np.ndarray]
    kappa: float

    @property
    def n(self) -> int:
        return self.A.shape[0]


def _spectrum_from_param(kind: str, n: int, t: float) -> np.ndarray:
    k = np.arange(1, n + 1, dtype=np.float64)
    if kind == "exp":
        return np.exp(-t * (k - 1))
    if kind == "poly":
        return k ** (-t)
    if kind == "harmonic":
        return 1.0 / (1.0 + t * (k - 1))
    # highrank: t is the floor value sigma_min
    knee = int(0.9 * n)
    sigma = np.full(n, t)
    sigma[:knee] = np.linspace(1.0, t, knee)
    return sigma


def build_spectrum(spec: SpectrumSpec) -> np.ndarray:
    """Spectrum whose Demmel condition matches the target to ~1e-6 relative."""
    n, kind, target = spec.n, spec.kind, spec.target_kappa

    if kind != "highrank" and target <= np.sqrt(n) * (1.0 + 1e-12):
        return np.ones(n)  # flat spectrum, decay parameter 0

    if kind == "highrank":
        # condition is decreasing in the floor value; param in (0, 1]
        kappa_of = lambda t: linalg.demmel_condition(  # noqa: E731
            _spectrum_from_param(kind, n, t))
        lo, hi = 1e-300, 1.0
        if kappa_of(hi) >= target:
            return _spectrum_from_param(kind, n, hi)
        for _ in range(BISECT_MAX_STEPS):
            mid = 0.5 * (lo + hi)
            if kappa_of(mid) >= target:
                lo = mid
            else:
                hi = mid
            if hi - lo <= BISECT_TOL * hi:
                break
        return _spectrum_from_param(kind, n, 0.5 * (lo + hi))

    # exp / poly / harmonic: condition is increasing in the decay parameter
    kappa_of = lambda t: linalg.demmel_condition(  # noqa: E731
        _spectrum_from_param(kind, n, t))
    lo = 0.0
    hi = 1.0
    while kappa_of(hi) < target:
        hi *= 2.0
        if hi > 1e6:
            raise ValueError("unreachable condition number")
    for _ in range(BISECT_MAX_STEPS):
        mid = 0.5 * (lo + hi)
        if kappa_of(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= BISECT_TOL * max(hi, 1.0):
            break
    return _spectrum_from_param(kind, n, 0.5 * (lo + hi))


def assemble_matrix(sigma, rng: np.random.Generator) -> np.ndarray:
    """A = U diag(sigma) V^T with independent Haar U and V, full precision."""
    sigma = np.asarray(sigma, dtype=np.float64)
    n = sigma.shape[0]
    U = linalg.haar_orthogonal(n, rng)
    V = linalg.haar_orthogonal(n, rng)
    return (U * sigma) @ V.T


def make_problem(A, sigma, rng: np.random.Generator,
                 mode: PrecisionMode) -> Problem:
    """Consistent system with a uniformly random unit solution vector.

    b is computed in full precision and then rounded entrywise into the
    working precision, keeping the stored system consistent to O(u ||A|| ||x||),
    below the kappa*u stability floor.
    """
    A = np.asarray(A, dtype=np.float64)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    x = rng.standard_normal(n)
    x /= np.linalg.norm(x)
    b = fl_round(A @ x, mode)
    if sigma is not None:
        sigma = np.asarray(sigma, dtype=np.float64)
        kappa = linalg.demmel_condition(sigma)
    else:
        kappa = linalg.frobenius_norm(A) / linalg.smallest_singular_value(A)
    return Problem(A=A, b=np.asarray(b), x_true=x, sigma=sigma, kappa=kappa)


def generate(spec: SpectrumSpec, rng: np.random.Generator,
             mode: PrecisionMode) -> Problem:
    sigma = build_spectrum(spec)
    A = assemble_matrix(sigma, rng)
    return make_problem(A, sigma, rng, mode)


def row_norm_preprocess(P: Problem) -> Problem:
    """Scale each row (and right-hand-side entry) by 1/||a_i||.

    The solution is unchanged and all rows get unit norm, so the balanced-row
    requirement 4 min ||a_i||^2 >= max ||a_i||^2 holds trivially.  The scaled
    matrix has a different spectrum, so sigma is dropped and the condition
    number is re-estimated.
    """
    norms = np.linalg.norm(P.A, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("cannot normalize zero row")
    A = P.A / norms[:, None]
    b = P.b / norms
    kappa = linalg.frobenius_norm(A) / linalg.smallest_singular_value(A)
    return Problem(A=A, b=b, x_true=P.x_true, sigma=None, kappa=kappa)


# --- persistence: KZMAT1 plus a JSON metadata sidecar ---

def save_problem(spec: SpectrumSpec, P: Problem, seed: int, path: str):
    linalg.save_matrix(P.A, path)
    meta = {
        "kind": spec.kind,
        "n": spec.n,
        "kappa_target": spec.target_kappa,
        "kappa_achieved": P.kappa,
        "seed": seed,
        "spectrum": list(map(float, P.sigma)) if P.sigma is not None else None,
    }
    with open(path + ".json", "w") as f:
        json.dump(meta, f, indent=1)
        f.write("\n")
