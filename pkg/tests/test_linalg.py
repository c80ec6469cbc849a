"""Tests for the dense linear algebra utilities."""

import numpy as np
import pytest

from kaczmarz_ir import linalg
from kaczmarz_ir.fparith import F32, F64, emulated


class TestHouseholderQR:
    def test_factorization_residual(self):
        rng = np.random.default_rng(0)
        for n in (3, 10, 40):
            M = rng.standard_normal((n, n))
            Q, R = linalg.householder_qr(M)
            assert np.linalg.norm(Q @ R - M) <= 1e-13 * np.linalg.norm(M) * n
            assert np.linalg.norm(Q.T @ Q - np.eye(n)) <= 1e-13 * n
            # R is upper triangular
            assert np.allclose(np.tril(R, -1), 0.0, atol=1e-12)

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            linalg.householder_qr(np.ones((3, 4)))


class TestHaarOrthogonal:
    def test_orthogonality(self):
        rng = np.random.default_rng(1)
        for n in (2, 25, 100):
            Q = linalg.haar_orthogonal(n, rng)
            assert np.linalg.norm(Q.T @ Q - np.eye(n)) <= 1e-12 * n

    def test_first_moment(self):
        # for Haar measure, E[Q_11] = 0 and E[Q_11^2] = 1/n
        rng = np.random.default_rng(2)
        n, reps = 5, 4000
        vals = np.array([linalg.haar_orthogonal(n, rng)[0, 0]
                         for _ in range(reps)])
        assert abs(vals.mean()) <= 5.0 / np.sqrt(reps)
        assert abs(np.mean(vals ** 2) - 1.0 / n) <= 0.02

    def test_deterministic_given_seed(self):
        a = linalg.haar_orthogonal(8, np.random.default_rng(7))
        b = linalg.haar_orthogonal(8, np.random.default_rng(7))
        assert np.array_equal(a, b)


class TestGeSolve:
    def test_solves_well_conditioned(self):
        rng = np.random.default_rng(3)
        A = rng.standard_normal((20, 20)) + 5.0 * np.eye(20)
        x = rng.standard_normal(20)
        b = A @ x
        xh = linalg.ge_solve(A, b, F64)
        assert np.linalg.norm(xh - x) <= 1e-12 * np.linalg.norm(x)

    def test_f32_error_level(self):
        rng = np.random.default_rng(4)
        A = rng.standard_normal((30, 30)) + 6.0 * np.eye(30)
        x = rng.standard_normal(30)
        b = A @ x
        xh = linalg.ge_solve(A, b, F32)
        err = np.linalg.norm(xh - x) / np.linalg.norm(x)
        assert 1e-9 < err < 1e-4  # single-precision territory

    def test_emu24_close_to_f32(self):
        rng = np.random.default_rng(5)
        A = rng.standard_normal((15, 15)) + 4.0 * np.eye(15)
        b = rng.standard_normal(15)
        x32 = linalg.ge_solve(A, b, F32)
        xe = linalg.ge_solve(A, b, emulated(24))
        assert np.linalg.norm(x32 - xe) <= 1e-5 * np.linalg.norm(x32)

    def test_singular(self):
        A = np.zeros((3, 3))
        with pytest.raises(ZeroDivisionError, match="singular"):
            linalg.ge_solve(A, np.ones(3), F64)

    def test_pivoting(self):
        # without pivoting this system loses all accuracy
        A = np.array([[1e-20, 1.0], [1.0, 1.0]])
        b = np.array([1.0, 2.0])
        x = linalg.ge_solve(A, b, F64)
        assert np.allclose(A @ x, b, atol=1e-12)


class TestDemmelCondition:
    def test_known_values(self):
        assert linalg.demmel_condition(np.ones(4)) == 2.0
        sigma = np.array([2.0, 1.0, 0.5])
        expected = np.sqrt(4.0 + 1.0 + 0.25) / 0.5
        assert abs(linalg.demmel_condition(sigma) - expected) < 1e-15

    def test_invalid(self):
        with pytest.raises(ValueError, match="invalid spectrum"):
            linalg.demmel_condition(np.array([1.0, -1.0]))
        with pytest.raises(ValueError, match="invalid spectrum"):
            linalg.demmel_condition(np.array([1.0, 2.0]))  # increasing
        with pytest.raises(ValueError, match="invalid spectrum"):
            linalg.demmel_condition(np.array([]))


class TestSmallestSingularValue:
    def test_against_construction(self):
        rng = np.random.default_rng(6)
        for n in (5, 20, 50):
            sigma = np.sort(rng.uniform(0.1, 3.0, n))[::-1]
            U = linalg.haar_orthogonal(n, rng)
            V = linalg.haar_orthogonal(n, rng)
            A = (U * sigma) @ V.T
            est = linalg.smallest_singular_value(A)
            assert abs(est - sigma[-1]) <= 1e-8 * sigma[-1]

    def test_tight_accuracy(self):
        # accuracy well beyond the documented 1e-6, needed by the
        # acceleration-parameter cross-check
        rng = np.random.default_rng(7)
        A = rng.standard_normal((30, 30))
        est = linalg.smallest_singular_value(A)
        ref = float(np.linalg.svd(A, compute_uv=False)[-1])
        assert abs(est - ref) <= 1e-9 * ref

    def test_singular_matrix(self):
        A = np.ones((4, 4))
        with pytest.raises((ZeroDivisionError, RuntimeError)):
            linalg.smallest_singular_value(A)


class TestRowSqNorms:
    def test_f64_matches_numpy(self):
        rng = np.random.default_rng(8)
        A = rng.standard_normal((10, 10))
        out = linalg.row_sq_norms(A, F64)
        ref = np.linalg.norm(A, axis=1) ** 2
        assert np.allclose(out, ref, rtol=1e-14)

    def test_low_precision_error(self):
        rng = np.random.default_rng(9)
        A = rng.standard_normal((10, 30))
        for mode in (F32, emulated(11)):
            out = linalg.row_sq_norms(A, mode)
            ref = np.linalg.norm(A, axis=1) ** 2
            assert np.all(np.abs(out - ref)
                          <= 40 * mode.unit_roundoff * ref)


class TestKzmat1:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(10)
        A = rng.standard_normal((7, 7))
        path = tmp_path / "m.kz"
        linalg.save_matrix(A, path)
        B = linalg.load_matrix(path)
        assert np.array_equal(A, B)

    def test_header(self, tmp_path):
        A = np.eye(3)
        path = tmp_path / "m.kz"
        linalg.save_matrix(A, path)
        raw = path.read_bytes()
        assert raw[:6] == b"KZMAT1"
        assert len(raw) == 6 + 16 + 8 * 9

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.kz"
        path.write_bytes(b"NOTMAT" + b"\0" * 32)
        with pytest.raises(ValueError, match="not a KZMAT1"):
            linalg.load_matrix(path)

    def test_truncated(self, tmp_path):
        A = np.eye(3)
        path = tmp_path / "m.kz"
        linalg.save_matrix(A, path)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(ValueError, match="truncated"):
            linalg.load_matrix(path)
