import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dxl.errors import DimensionError, DomainError
from dxl.hermitian import (
    check_spectra_point,
    exp_project,
    frobenius,
    herm_exp,
    herm_log,
    hermitian,
    is_hermitian,
    log_exp_project,
    random_hermitian,
    spectral_norm,
    trace_inner,
    uniform_point,
    vn_entropy,
)

from conftest import random_herm, random_point

seeds = st.integers(0, 2**32 - 1)
dims = st.integers(1, 6)


class TestHermitian:
    def test_symmetrizes_near_hermitian_input(self):
        a = np.array([[1.0, 2.0 + 1e-13j], [2.0, 3.0]])
        h = hermitian(a)
        assert is_hermitian(h, atol=0.0)
        np.testing.assert_allclose(h, a, atol=1e-12)

    def test_rejects_non_square(self):
        with pytest.raises(DimensionError):
            hermitian(np.zeros((2, 3)))

    @given(seeds, dims)
    def test_eigenvalues_real(self, seed, n):
        a = random_herm(np.random.default_rng(seed), n)
        w = np.linalg.eigvals(a)
        np.testing.assert_allclose(w.imag, 0.0, atol=1e-10)


class TestHermExp:
    def test_zero(self):
        np.testing.assert_allclose(herm_exp(np.zeros((2, 2))), np.eye(2), atol=1e-15)

    def test_diagonal(self):
        np.testing.assert_allclose(
            herm_exp(np.diag([1.0, -1.0])), np.diag([np.e, 1 / np.e]), atol=1e-14
        )

    def test_closed_form_two_by_two(self):
        t = 0.5
        expected = np.array([[np.cosh(t), np.sinh(t)], [np.sinh(t), np.cosh(t)]])
        np.testing.assert_allclose(herm_exp([[0, t], [t, 0]]), expected, atol=1e-14)
        np.testing.assert_allclose(expected, [[1.127626, 0.521095], [0.521095, 1.127626]], atol=1e-6)

    def test_batched(self, rng):
        a = np.stack([random_herm(rng, 3) for _ in range(4)])
        out = herm_exp(a)
        for ai, oi in zip(a, out):
            np.testing.assert_allclose(oi, herm_exp(ai), atol=1e-13)


class TestHermLog:
    def test_identity(self):
        np.testing.assert_allclose(herm_log(np.eye(3)), np.zeros((3, 3)), atol=1e-15)

    def test_diagonal(self):
        np.testing.assert_allclose(herm_log(np.diag([np.e, 1.0])), np.diag([1.0, 0.0]), atol=1e-15)

    @given(seeds, dims)
    def test_round_trip(self, seed, n):
        a = random_herm(np.random.default_rng(seed), n)
        a *= 2.0 / max(spectral_norm(a), 1e-12)
        np.testing.assert_allclose(herm_log(herm_exp(a)), a, atol=1e-10)

    def test_unclamped_rejects_singular(self):
        with pytest.raises(DomainError):
            herm_log(np.diag([1.0, 0.0]), clamp=False)

    def test_clamped_is_finite_on_boundary(self):
        assert np.all(np.isfinite(herm_log(np.diag([1.0, 0.0]))))


class TestExpProject:
    def test_zero_gives_barycenter(self):
        np.testing.assert_allclose(exp_project(np.zeros((2, 2))), np.eye(2) / 2, atol=1e-15)

    def test_analytic(self):
        np.testing.assert_allclose(
            exp_project(np.diag([np.log(3), 0.0])), np.diag([0.75, 0.25]), atol=1e-14
        )

    def test_shift_example(self):
        y = 100 * np.eye(2) + np.diag([np.log(3), 0.0])
        np.testing.assert_allclose(exp_project(y), np.diag([0.75, 0.25]), atol=1e-14)

    @given(seeds, dims, st.floats(-1e3, 1e3))
    def test_shift_invariance(self, seed, n, c):
        y = random_herm(np.random.default_rng(seed), n, scale=5.0)
        assert frobenius(exp_project(y + c * np.eye(n)) - exp_project(y)) < 1e-10

    @given(seeds, dims)
    def test_lands_in_spectrahedron(self, seed, n):
        y = random_herm(np.random.default_rng(seed), n, scale=50.0)
        check_spectra_point(exp_project(y))

    def test_no_overflow_for_huge_scores(self):
        x = exp_project(np.diag([1e5, 0.0, -1e5]))
        np.testing.assert_allclose(x, np.diag([1.0, 0.0, 0.0]), atol=1e-300)

    def test_log_matches_direct_log(self, rng):
        y = random_herm(rng, 4)
        np.testing.assert_allclose(log_exp_project(y), herm_log(exp_project(y)), atol=1e-12)


class TestEntropy:
    def test_uniform(self):
        assert vn_entropy(np.eye(2) / 2) == pytest.approx(-np.log(2), abs=1e-15)

    def test_pure_state(self):
        assert vn_entropy(np.diag([1.0, 0.0])) == 0.0

    def test_arithmetic(self):
        expected = 0.75 * np.log(0.75) + 0.25 * np.log(0.25)
        assert vn_entropy(np.diag([0.75, 0.25])) == pytest.approx(expected, abs=1e-15)
        assert expected == pytest.approx(-0.562335, abs=1e-6)

    @given(seeds, dims)
    def test_range(self, seed, n):
        x = random_point(np.random.default_rng(seed), n)
        h = vn_entropy(x)
        assert -np.log(n) - 1e-12 <= h <= 1e-12
        assert vn_entropy(uniform_point(n)) <= h + 1e-12


class TestTraceInner:
    def test_identity(self):
        assert trace_inner(np.eye(2), np.eye(2)) == 2.0

    def test_traceless_against_identity(self):
        assert trace_inner(np.diag([1.0, -1.0]), np.eye(2) / 2) == 0.0

    @given(seeds, dims)
    def test_symmetric(self, seed, n):
        rng = np.random.default_rng(seed)
        a, b = random_herm(rng, n), random_herm(rng, n)
        assert trace_inner(a, b) == pytest.approx(trace_inner(b, a), abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            trace_inner(np.eye(2), np.eye(3))


class TestRandomHermitian:
    def test_deterministic(self):
        np.testing.assert_array_equal(random_hermitian(4, 1.5, 9), random_hermitian(4, 1.5, 9))

    def test_scalar(self):
        a = random_hermitian(1, 1.0, 3)
        assert a.shape == (1, 1)
        assert a[0, 0].imag == 0.0
        assert -1.0 <= a[0, 0].real <= 1.0

    def test_norm_bound_over_many_samples(self):
        norms = np.array([spectral_norm(random_hermitian(3, 0.7, s)) for s in range(10_000)])
        assert np.all(norms <= 0.7 + 1e-12)


class TestSpectraPoint:
    def test_rejects_wrong_trace(self):
        with pytest.raises(DomainError):
            check_spectra_point(np.eye(2))

    def test_rejects_indefinite(self):
        with pytest.raises(DomainError):
            check_spectra_point(np.diag([1.5, -0.5]))

    def test_accepts_tiny_negative_eigenvalue(self):
        check_spectra_point(np.diag([1 + 1e-11, -1e-11]))
