"""Error traces and their CSV format.

A trace is the unit of experiment output: metadata plus (iteration,
forward error) samples.  The CSV layout is

    # key=value          (metadata lines)
    iter,forward_error
    0,1.0
    ...

with ``forward_error`` printed as the shortest round-trip decimal, so a
round-trip through ``emit_csv``/``parse_csv`` is bit-exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

META_KEYS = ("method", "n", "kappa_target", "kappa_achieved", "precision",
             "seed", "trial", "lambda", "schedule")


@dataclass
class ErrorTrace:
    meta: dict
    samples: list = field(default_factory=list)  # [(iteration, forward_error)]

    @property
    def iterations(self) -> np.ndarray:
        return np.array([s[0] for s in self.samples], dtype=np.int64)

    @property
    def errors(self) -> np.ndarray:
        return np.array([s[1] for s in self.samples], dtype=np.float64)

    @property
    def final_error(self) -> float:
        return self.samples[-1][1]

    def first_below(self, tol: float):
        """First recorded iteration at which the error is <= tol, or None."""
        for k, err in self.samples:
            if err <= tol:
                return k
        return None


def trace_grid(iters: int, points: int) -> np.ndarray:
    """Log-spaced checkpoint iterations: 0 plus a geometric grid 1..iters."""
    if iters < 1 or points < 2:
        raise ValueError("need iters >= 1 and points >= 2")
    grid = np.ceil(np.geomspace(1.0, float(iters), points)).astype(np.int64)
    return np.unique(np.concatenate(([0], grid)))


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_csv(trace: ErrorTrace, path):
    try:
        with open(path, "w") as f:
            for key in META_KEYS:
                if key in trace.meta and trace.meta[key] is not None:
                    f.write(f"# {key}={_fmt(trace.meta[key])}\n")
            f.write("iter,forward_error\n")
            for k, err in trace.samples:
                f.write(f"{int(k)},{repr(float(err))}\n")
    except OSError as e:
        raise OSError(f"cannot write trace to {path}: {e}") from e


def parse_csv(path) -> ErrorTrace:
    meta = {}
    samples = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key.strip()] = val
            elif line.startswith("iter,"):
                continue
            else:
                k, err = line.split(",")
                samples.append((int(k), float(err)))
    return ErrorTrace(meta=meta, samples=samples)
