"""Configurable floating-point model.

Every elementary operation of the solvers is routed through this module (or
through the compiled kernels in ``kernels.py``, which implement the same
semantics), so rounding happens exactly once per operation.

Three modes are supported:

* ``f64`` -- native double precision, unit roundoff 2^-53.
* ``f32`` -- native single precision (hardware float32 ops), u = 2^-24.
* ``emu:<p>`` -- a p-bit significand emulated on top of double precision:
  compute in double, then round the significand to p bits with
  round-to-nearest-even.  The exponent range is the double range; a true
  narrow format's overflow/underflow is not modeled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PrecisionMode",
    "F64",
    "F32",
    "emulated",
    "fl_round",
    "fl_op",
    "fl_dot",
    "fl_axpy",
    "count_ops",
    "op_count",
]


@dataclass(frozen=True)
class PrecisionMode:
    """Floating-point model: native double/single or emulated p-bit."""

    kind: str  # "f64", "f32" or "emu"
    significand_bits: int  # p, counting the implicit leading bit

    def __post_init__(self):
        if self.kind not in ("f64", "f32", "emu"):
            raise ValueError(f"unknown precision kind {self.kind!r}")
        if self.kind == "emu" and not (2 <= self.significand_bits <= 52):
            raise ValueError("emulated significand must have 2..52 bits")

    @property
    def unit_roundoff(self) -> float:
        return 2.0 ** (-self.significand_bits)

    @property
    def np_dtype(self):
        return np.float32 if self.kind == "f32" else np.float64

    @property
    def label(self) -> str:
        if self.kind == "emu":
            return f"emu:{self.significand_bits}"
        return self.kind

    @classmethod
    def parse(cls, flag: str) -> "PrecisionMode":
        """Parse a --precision flag: f64 | f32 | emu:<p>."""
        if flag == "f64":
            return F64
        if flag == "f32":
            return F32
        if flag.startswith("emu:"):
            return emulated(int(flag.split(":", 1)[1]))
        raise ValueError(f"cannot parse precision {flag!r}")


F64 = PrecisionMode("f64", 53)
F32 = PrecisionMode("f32", 24)


def emulated(p: int) -> PrecisionMode:
    return PrecisionMode("emu", p)


# --- op counting (used by tests that instrument the op log) ---

_counting = False
_op_count = 0


class count_ops:
    """Context manager that counts elementary rounded operations."""

    def __enter__(self):
        global _counting, _op_count
        _counting = True
        _op_count = 0
        return self

    def __exit__(self, *exc):
        global _counting
        _counting = False
        return False


def op_count() -> int:
    return _op_count


def _tally(k: int):
    global _op_count
    if _counting:
        _op_count += k


# --- rounding ---

def _round_significand(x, p: int):
    """Round float64 value(s) to a p-bit significand, ties to even."""
    m, e = np.frexp(x)
    return np.ldexp(np.rint(m * 2.0 ** p), e - p)


def fl_round(x, mode: PrecisionMode):
    """Round a finite scalar or array into the given precision.

    Returns float64 value(s) exactly representable in the mode.
    """
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite operand")
    if mode.kind == "f64":
        out = arr
    elif mode.kind == "f32":
        with np.errstate(over="ignore"):
            out = arr.astype(np.float32).astype(np.float64)
        if not np.all(np.isfinite(out)):
            raise OverflowError("overflow")
    else:
        out = _round_significand(arr, mode.significand_bits)
    if np.isscalar(x) or arr.ndim == 0:
        return float(out)
    return out


def fl_op(a: float, b: float, op: str, mode: PrecisionMode) -> float:
    """One rounded elementary operation on exactly-represented scalars."""
    if not (np.isfinite(a) and np.isfinite(b)):
        raise ValueError("non-finite operand")
    if op == "/" and b == 0.0:
        raise ZeroDivisionError("singular operand")
    _tally(1)
    if mode.kind == "f32":
        fa, fb = np.float32(a), np.float32(b)
        if op == "+":
            r = fa + fb
        elif op == "-":
            r = fa - fb
        elif op == "*":
            r = fa * fb
        elif op == "/":
            r = fa / fb
        else:
            raise ValueError(f"unknown op {op!r}")
        r = float(r)
    else:
        if op == "+":
            r = a + b
        elif op == "-":
            r = a - b
        elif op == "*":
            r = a * b
        elif op == "/":
            r = a / b
        else:
            raise ValueError(f"unknown op {op!r}")
        if mode.kind == "emu":
            r = float(_round_significand(r, mode.significand_bits))
    if np.isinf(r):
        raise OverflowError("overflow")
    return r


def fl_dot(x, y, mode: PrecisionMode) -> float:
    """Sequential left-to-right dot product, every multiply and add rounded.

    The fixed accumulation order makes runs bit-reproducible for a fixed
    seed; the compiled kernels use the same order.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("dimension mismatch")
    n = x.shape[0]
    if n == 0:
        return 0.0
    acc = fl_op(x[0], y[0], "*", mode)
    for j in range(1, n):
        acc = fl_op(acc, fl_op(x[j], y[j], "*", mode), "+", mode)
    return acc


def fl_axpy(gamma: float, x, y, mode: PrecisionMode):
    """Componentwise round(round(gamma*x_i) + y_i)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("dimension mismatch")
    _tally(2 * x.shape[0])
    with np.errstate(over="ignore"):
        if mode.kind == "f32":
            g = np.float32(gamma)
            out = (g * x.astype(np.float32)
                   + y.astype(np.float32)).astype(np.float64)
        elif mode.kind == "emu":
            p = mode.significand_bits
            out = _round_significand(_round_significand(gamma * x, p) + y, p)
        else:
            out = gamma * x + y
    if not np.all(np.isfinite(out)):
        raise OverflowError("overflow")
    return out
