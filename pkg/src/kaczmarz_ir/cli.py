"""Command-line interface.

Subcommands:

* ``gen``        generate a test matrix (KZMAT1 + JSON sidecar)
* ``run``        run a solver experiment and emit per-trial CSV traces
* ``verify``     run oracle check suites, one JSON line per check
* ``summarize``  aggregate CSV traces into summary statistics

Exit codes: 0 success, 1 validation error, 2 numerical failure, 3 I/O.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import matgen
from .fparith import F64
from .harness import ConfigError, ExperimentConfig, run_experiment, summarize
from .refine import RefineSchedule
from .trace import emit_csv, parse_csv


def _add_run_args(p):
    p.add_argument("--method", choices=["rk", "rk-ir", "ark", "ark-ir",
                                        "direct"])
    p.add_argument("--matrix", help="path to a KZMAT1 matrix file")
    p.add_argument("--kind", choices=list(matgen.KINDS))
    p.add_argument("--n", type=int)
    p.add_argument("--kappa", type=float)
    p.add_argument("--iters", type=int)
    p.add_argument("--precision", default=None,
                   help="f64 | f32 | emu:<p>")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--trace-points", type=int, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="fixed regularization value")
    p.add_argument("--lambda-policy",
                   choices=["fixed", "option1", "option2-preprocess"],
                   default=None)
    p.add_argument("--refine-at", default=None,
                   help="comma-separated refinement iteration counts")
    p.add_argument("--refine-every", type=int, default=None,
                   help="refinement window length")
    p.add_argument("--exact-mu-nu", action="store_true", default=None,
                   help="use brute-force ideal mu/nu (small n only)")
    p.add_argument("--config", help="JSON config file; flags override it")
    p.add_argument("--out", required=True,
                   help="output prefix; one CSV per trial")


def _config_from_args(args) -> ExperimentConfig:
    d = {}
    if args.config:
        with open(args.config) as f:
            d = json.load(f)
    overrides = {
        "method": args.method,
        "matrix_path": args.matrix,
        "kind": args.kind,
        "n": args.n,
        "kappa": args.kappa,
        "iters": args.iters,
        "precision": args.precision,
        "base_seed": args.seed,
        "trials": args.trials,
        "trace_points": args.trace_points,
        "lambda_value": args.lam,
        "lambda_policy": args.lambda_policy,
        "exact_mu_nu": args.exact_mu_nu,
    }
    for k, v in overrides.items():
        if v is not None:
            d[k] = v
    if args.refine_at is not None and args.refine_every is not None:
        raise ConfigError(["schedule: give --refine-at or --refine-every, "
                           "not both"])
    iters = d.get("iters")
    if iters is not None:
        if args.refine_at is not None:
            points = [int(s) for s in args.refine_at.split(",") if s]
            d["schedule"] = RefineSchedule.at_points(points, iters)
        elif args.refine_every is not None:
            d["schedule"] = RefineSchedule.every(iters, args.refine_every)
    d.setdefault("precision", "f64")
    d.setdefault("iters", 1)
    d.setdefault("method", "rk")
    return ExperimentConfig.from_dict(d)


def cmd_gen(args) -> int:
    spec = matgen.SpectrumSpec(args.kind, args.n, args.kappa)
    rng = np.random.default_rng(args.seed)
    problem = matgen.generate(spec, rng, F64)
    matgen.save_problem(spec, problem, args.seed, args.out)
    print(f"wrote {args.out} (kappa achieved {problem.kappa:.6g})")
    return 0


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    traces = run_experiment(cfg)
    outdir = os.path.dirname(args.out)
    if outdir:
        os.makedirs(outdir, exist_ok=True)
    for j, tr in enumerate(traces):
        path = f"{args.out}_{j:03d}.csv"
        emit_csv(tr, path)
        print(path)
    return 0


def cmd_summarize(args) -> int:
    traces = [parse_csv(p) for p in args.csv]
    baseline = [parse_csv(p) for p in args.baseline] if args.baseline else None
    print(json.dumps(summarize(traces, baseline), indent=1))
    return 0


def _verify_equivalence(seed, count):
    from fractions import Fraction
    from . import oracle
    rng = np.random.default_rng(seed)
    results = []
    for case in range(count):
        n, steps = 6, 30
        A = _random_invertible(rng, n)
        b = [Fraction(int(v)) for v in rng.integers(-5, 6, size=n)]
        seq = [int(i) for i in rng.integers(0, n, size=steps)]
        segments = _random_segments(rng, steps)
        x0 = [Fraction(0)] * n
        plain = oracle.rk_exact(A, b, x0, seq)
        refined = oracle.rk_ir_exact(A, b, x0, seq, segments)
        results.append({"suite": "equivalence", "case": f"rk-{case}",
                        "pass": plain == refined})
        params = oracle.ExactArkParams.from_spq(
            Fraction(1, 2), Fraction(1, 3), Fraction(3), Fraction(1, 100))
        plain_a = oracle.ark_exact(A, b, x0, seq, params)
        refined_a = oracle.ark_ir_exact(A, b, x0, seq, params, segments)
        results.append({"suite": "equivalence", "case": f"ark-{case}",
                        "pass": plain_a == refined_a})
    return results


def _random_invertible(rng, n):
    from fractions import Fraction
    while True:
        M = rng.integers(-5, 6, size=(n, n))
        if abs(np.linalg.det(M.astype(np.float64))) > 0.5:
            return [[Fraction(int(v)) for v in row] for row in M]


def _random_segments(rng, steps):
    t = int(rng.integers(0, 3))
    if t == 0:
        return [steps]
    cuts = sorted(rng.choice(np.arange(1, steps), size=t, replace=False))
    segs, prev = [], 0
    for c in cuts:
        segs.append(int(c) - prev)
        prev = int(c)
    segs.append(steps - prev)
    return segs


def _verify_munu(seed, count):
    from . import linalg, oracle, solvers
    rng = np.random.default_rng(seed)
    results = []
    for case in range(count):
        n = 20
        A = rng.standard_normal((n, n))
        lam = [0.0, float(np.linalg.norm(A) ** 2 / n), 1e-6][case % 3]
        mu_bf, nu_bf = oracle.mu_nu_bruteforce(A, lam)
        smin = linalg.smallest_singular_value(A)
        rsn = np.linalg.norm(A, axis=1) ** 2
        p = solvers.ark_params(float(np.linalg.norm(A) ** 2), n, smin,
                               float(rsn.min()), lam)
        mu_ok = abs(p.mu_t - mu_bf) / mu_bf <= 1e-8
        nu_ok = nu_bf <= p.nu_t * (1 + 1e-10)
        results.append({"suite": "munu", "case": f"mu-{case}", "pass": mu_ok})
        results.append({"suite": "munu", "case": f"nu-{case}", "pass": nu_ok})
    return results


def _verify_lyapunov(seed):
    from . import matgen as mg, oracle, solvers
    rng = np.random.default_rng(seed)
    spec = mg.SpectrumSpec("exp", 30, 50.0)
    problem = mg.generate(spec, rng, F64)
    lam = 1e-6
    params = solvers.ark_params_for(problem, lam)
    Pinv = oracle.pbar_pinv(problem.A, lam)
    sums = {}
    trials = 50

    def hook(k, v, y):
        sums.setdefault(k, 0.0)
        sums[k] += oracle.ark_lyapunov(v, y, problem.x_true, params.mu_t,
                                       Pinv)

    for j in range(trials):
        solvers.run_ark(problem, 4000, params, F64, seed + 1000 + j,
                        trace_points=10, state_hook=hook)
    ks = sorted(sums)
    means = [sums[k] / trials for k in ks]
    ok = all(means[i + 1] <= means[i] * 1.05 for i in range(len(means) - 1))
    return [{"suite": "lyapunov", "case": "mean-delta-nonincreasing",
             "pass": ok}]


def cmd_verify(args) -> int:
    if args.suite == "equivalence":
        results = _verify_equivalence(args.seed, args.count)
    elif args.suite == "munu":
        results = _verify_munu(args.seed, args.count)
    else:
        results = _verify_lyapunov(args.seed)
    for r in results:
        print(json.dumps(r))
    return 0 if all(r["pass"] for r in results) else 2


def build_parser():
    ap = argparse.ArgumentParser(prog="kaczmarz-ir")
    sub = ap.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen", help="generate a test matrix")
    g.add_argument("--kind", required=True, choices=list(matgen.KINDS))
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--kappa", type=float, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="run a solver experiment")
    _add_run_args(r)
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="run oracle check suites")
    v.add_argument("--suite", required=True,
                   choices=["equivalence", "munu", "lyapunov"])
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--count", type=int, default=10)
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("summarize", help="aggregate CSV traces")
    s.add_argument("csv", nargs="+")
    s.add_argument("--baseline", nargs="*", default=None)
    s.set_defaults(func=cmd_summarize)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (ZeroDivisionError, OverflowError, ArithmeticError,
            RuntimeError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
