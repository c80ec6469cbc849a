"""Experiment orchestration: configuration, seeding, trial fan-out, and
summary statistics.

Determinism contract: a (config, base_seed) pair yields byte-identical
output.  The problem is generated once per config; trial j draws its solver
seed from the spawn tree of the base seed, so trial streams never share
state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import linalg, matgen, solvers
from .fparith import PrecisionMode
from .matgen import Problem, SpectrumSpec
from .refine import RefineSchedule, rk_ir_inline, run_ark_ir
from .solvers import ark_params_for, forward_error, run_ark, run_rk
from .trace import ErrorTrace

METHODS = ("rk", "rk-ir", "ark", "ark-ir", "direct")
LAMBDA_POLICIES = ("fixed", "option1", "option2-preprocess")

DEFAULT_LAMBDA = 1e-6


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass
class ExperimentConfig:
    method: str
    precision: PrecisionMode
    iters: int
    kind: Optional[str] = None
    n: Optional[int] = None
    kappa: Optional[float] = None
    matrix_path: Optional[str] = None
    schedule: Optional[RefineSchedule] = None
    lambda_policy: str = "fixed"
    lambda_value: float = DEFAULT_LAMBDA
    trials: int = 1
    base_seed: int = 0
    trace_points: int = 50
    exact_mu_nu: bool = False

    def validate(self):
        errs = []
        if self.method not in METHODS:
            errs.append(f"method: unknown {self.method!r}")
        if self.iters < 1:
            errs.append("iters: must be >= 1")
        if self.trials < 1:
            errs.append("trials: must be >= 1")
        if self.trace_points < 2:
            errs.append("trace_points: must be >= 2")
        if self.lambda_policy not in LAMBDA_POLICIES:
            errs.append(f"lambda_policy: unknown {self.lambda_policy!r}")
        if self.matrix_path is None:
            if self.kind is None or self.n is None or self.kappa is None:
                errs.append("problem: need either matrix_path or "
                            "kind/n/kappa")
        if errs:
            raise ConfigError(errs)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if "precision" in d and isinstance(d["precision"], str):
            d["precision"] = PrecisionMode.parse(d["precision"])
        if "schedule" in d and d["schedule"] is not None \
                and not isinstance(d["schedule"], RefineSchedule):
            d["schedule"] = RefineSchedule(tuple(d["schedule"]))
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError([f"{k}: unknown field" for k in sorted(unknown)])
        return cls(**d)


def _build_problem(cfg: ExperimentConfig, rng) -> Problem:
    if cfg.matrix_path is not None:
        A = linalg.load_matrix(cfg.matrix_path)
        return matgen.make_problem(A, None, rng, cfg.precision)
    spec = SpectrumSpec(cfg.kind, cfg.n, cfg.kappa)
    return matgen.generate(spec, rng, cfg.precision)


def _resolve_lambda(cfg: ExperimentConfig, problem: Problem):
    """Returns (problem, lambda) after applying the regularization policy."""
    if cfg.lambda_policy == "option1":
        return problem, linalg.frobenius_norm(problem.A) ** 2 / problem.n
    if cfg.lambda_policy == "option2-preprocess":
        return matgen.row_norm_preprocess(problem), 0.0
    return problem, cfg.lambda_value


def _default_schedule(method: str, iters: int) -> RefineSchedule:
    if method == "rk-ir":
        return RefineSchedule.halfway(iters)
    # ark-ir: a refinement every fixed window, ten windows per run
    return RefineSchedule.every(iters, max(1, iters // 10))


def run_experiment(cfg: ExperimentConfig) -> list:
    """Run all trials of a configured experiment; returns one trace each."""
    cfg.validate()
    root = np.random.SeedSequence(cfg.base_seed)
    gen_seq, trial_root = root.spawn(2)
    problem = _build_problem(cfg, np.random.default_rng(gen_seq))
    trial_seqs = trial_root.spawn(cfg.trials)

    lam = 0.0
    params = None
    if cfg.method in ("ark", "ark-ir"):
        problem, lam = _resolve_lambda(cfg, problem)
        if cfg.exact_mu_nu:
            from .oracle import mu_nu_bruteforce
            mu, nu = mu_nu_bruteforce(problem.A, lam)
            params = solvers.ArkParams.from_mu_nu(mu, nu, lam)
        else:
            params = ark_params_for(problem, lam)

    sched = cfg.schedule
    if sched is None and cfg.method in ("rk-ir", "ark-ir"):
        sched = _default_schedule(cfg.method, cfg.iters)
    if sched is not None and sched.total_iters != cfg.iters \
            and cfg.method in ("rk-ir", "ark-ir"):
        raise ConfigError(["schedule: segment budgets must sum to iters"])

    traces = []
    for j, seq in enumerate(trial_seqs):
        seed = int(seq.generate_state(1)[0])
        if cfg.method == "rk":
            tr = run_rk(problem, cfg.iters, cfg.precision, seed,
                        cfg.trace_points)
        elif cfg.method == "rk-ir":
            tr = rk_ir_inline(problem, sched, cfg.precision, seed,
                              cfg.trace_points)
        elif cfg.method == "ark":
            tr = run_ark(problem, cfg.iters, params, cfg.precision, seed,
                         cfg.trace_points)
        elif cfg.method == "ark-ir":
            tr = run_ark_ir(problem, params, sched, cfg.precision, seed,
                            cfg.trace_points)
        else:  # direct
            x = linalg.ge_solve(problem.A, problem.b, cfg.precision)
            tr = ErrorTrace(
                meta={"method": "direct"},
                samples=[(0, forward_error(x, problem.x_true))])
        tr.meta.update({
            "method": cfg.method,
            "n": problem.n,
            "kappa_target": cfg.kappa,
            "kappa_achieved": problem.kappa,
            "precision": cfg.precision.label,
            "seed": seed,
            "trial": j,
            "lambda": lam,
            "schedule": sched.describe() if sched is not None else None,
        })
        traces.append(tr)
    return traces


def summarize(traces, baseline=None) -> dict:
    """Per-checkpoint and final-error statistics across trials."""
    if not traces:
        raise ValueError("empty input")
    its = traces[0].iterations
    if any(not np.array_equal(t.iterations, its) for t in traces):
        raise ValueError("traces have mismatched checkpoint grids")
    errs = np.stack([t.errors for t in traces])
    finals = errs[:, -1]
    out = {
        "trials": len(traces),
        "iterations": its.tolist(),
        "median": np.median(errs, axis=0).tolist(),
        "mean": np.mean(errs, axis=0).tolist(),
        "p10": np.percentile(errs, 10, axis=0).tolist(),
        "p90": np.percentile(errs, 90, axis=0).tolist(),
        "final": {
            "median": float(np.median(finals)),
            "mean": float(np.mean(finals)),
            "min": float(np.min(finals)),
            "max": float(np.max(finals)),
        },
    }
    if baseline:
        base = float(np.median([t.final_error for t in baseline]))
        out["final"]["baseline_median"] = base
        out["final"]["ratio_vs_baseline"] = (
            float(np.median(finals)) / base if base > 0 else float("inf"))
    return out
