"""Tests for synthetic problem generation."""

import json

import numpy as np
import pytest

from kaczmarz_ir import linalg, matgen
from kaczmarz_ir.fparith import F32, F64
from kaczmarz_ir.matgen import Problem, SpectrumSpec


class TestSpectrumSpec:
    def test_valid(self):
        SpectrumSpec("exp", 10, 100.0)

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="unknown spectrum kind"):
            SpectrumSpec("cliff", 10, 100.0)

    def test_unreachable_kappa(self):
        # every n x n matrix has Demmel condition >= sqrt(n)
        with pytest.raises(ValueError, match="unreachable"):
            SpectrumSpec("exp", 100, 5.0)

    def test_small_n(self):
        with pytest.raises(ValueError):
            SpectrumSpec("exp", 1, 10.0)


class TestBuildSpectrum:
    @pytest.mark.parametrize("kind", matgen.KINDS)
    @pytest.mark.parametrize("target", [50.0, 1e3, 1e5])
    def test_hits_target(self, kind, target):
        spec = SpectrumSpec(kind, 100, target)
        sigma = matgen.build_spectrum(spec)
        got = linalg.demmel_condition(sigma)
        assert abs(got - target) <= 1e-3 * target
        assert np.all(np.diff(sigma) <= 0.0) and np.all(sigma > 0.0)

    def test_exp_shape(self):
        sigma = matgen.build_spectrum(SpectrumSpec("exp", 50, 1e3))
        # geometric decay: constant ratio between consecutive entries
        ratios = sigma[1:] / sigma[:-1]
        assert np.allclose(ratios, ratios[0], rtol=1e-12)

    def test_highrank_shape(self):
        n = 100
        sigma = matgen.build_spectrum(SpectrumSpec("highrank", n, 1e3))
        knee = int(0.9 * n)
        assert sigma[0] == 1.0
        assert np.allclose(sigma[knee:], sigma[-1])
        # linear decay before the knee
        diffs = np.diff(sigma[:knee])
        assert np.allclose(diffs, diffs[0], rtol=1e-9)

    def test_flat_edge_case(self):
        n = 16
        sigma = matgen.build_spectrum(SpectrumSpec("exp", n, float(np.sqrt(n))))
        assert np.array_equal(sigma, np.ones(n))


class TestAssembleAndGenerate:
    def test_singular_values_preserved(self):
        rng = np.random.default_rng(0)
        sigma = np.array([3.0, 1.0, 0.5, 0.1])
        A = matgen.assemble_matrix(sigma, rng)
        sv = np.linalg.svd(A, compute_uv=False)
        assert np.allclose(sv, sigma, rtol=1e-12)

    def test_problem_consistency(self):
        rng = np.random.default_rng(1)
        p = matgen.generate(SpectrumSpec("poly", 40, 100.0), rng, F64)
        assert p.n == 40
        assert abs(np.linalg.norm(p.x_true) - 1.0) <= 1e-14
        assert np.linalg.norm(p.A @ p.x_true - p.b) <= 1e-13 * np.linalg.norm(p.b)
        assert abs(p.kappa - 100.0) <= 0.1

    def test_b_rounded_into_mode(self):
        rng = np.random.default_rng(2)
        p = matgen.generate(SpectrumSpec("exp", 10, 20.0), rng, F32)
        assert np.array_equal(p.b, p.b.astype(np.float32).astype(np.float64))

    def test_deterministic_given_seed(self):
        spec = SpectrumSpec("harmonic", 12, 30.0)
        p1 = matgen.generate(spec, np.random.default_rng(5), F64)
        p2 = matgen.generate(spec, np.random.default_rng(5), F64)
        assert np.array_equal(p1.A, p2.A)
        assert np.array_equal(p1.b, p2.b)
        assert np.array_equal(p1.x_true, p2.x_true)

    def test_scaling_invariance_of_condition(self):
        # Demmel condition is scale invariant; generated spectra start at
        # sigma_1 = 1 but any rescaling keeps kappa fixed
        sigma = matgen.build_spectrum(SpectrumSpec("exp", 20, 500.0))
        assert abs(linalg.demmel_condition(sigma)
                   - linalg.demmel_condition(7.3 * sigma)) <= 1e-9 * 500.0


class TestRowNormPreprocess:
    def test_rows_normalized_solution_kept(self):
        rng = np.random.default_rng(3)
        p = matgen.generate(SpectrumSpec("exp", 15, 50.0), rng, F64)
        q = matgen.row_norm_preprocess(p)
        norms = np.linalg.norm(q.A, axis=1)
        assert np.allclose(norms, 1.0, rtol=1e-14)
        assert np.array_equal(q.x_true, p.x_true)
        assert np.linalg.norm(q.A @ q.x_true - q.b) <= 1e-12
        assert q.sigma is None

    def test_zero_row(self):
        p = Problem(A=np.zeros((3, 3)), b=np.zeros(3),
                    x_true=np.zeros(3), sigma=None, kappa=1.0)
        with pytest.raises(ValueError, match="zero row"):
            matgen.row_norm_preprocess(p)


class TestSaveProblem:
    def test_sidecar_metadata(self, tmp_path):
        rng = np.random.default_rng(4)
        spec = SpectrumSpec("exp", 8, 10.0)
        p = matgen.generate(spec, rng, F64)
        path = str(tmp_path / "prob.kz")
        matgen.save_problem(spec, p, 4, path)
        A = linalg.load_matrix(path)
        assert np.array_equal(A, p.A)
        meta = json.loads((tmp_path / "prob.kz.json").read_text())
        assert meta["kind"] == "exp"
        assert meta["n"] == 8
        assert meta["seed"] == 4
        assert abs(meta["kappa_achieved"] - p.kappa) < 1e-12
        assert len(meta["spectrum"]) == 8
