import numpy as np
import pytest

from lfsim.numerics import bessel_j0, eig_symmetric, logdet_i_plus_hermitian

from oracles import first_j0_zero, j0_series, logdet_eig_sum, random_psd


class TestBesselJ0:
    def test_at_zero(self):
        assert bessel_j0(0.0) == 1.0

    def test_first_zero_matches_series_bisection(self):
        zero = first_j0_zero()
        assert zero == pytest.approx(2.404825557695773, abs=1e-12)
        assert bessel_j0(zero) == pytest.approx(0.0, abs=1e-9)

    def test_at_one(self):
        assert bessel_j0(1.0) == pytest.approx(j0_series(1.0), abs=1e-12)
        assert bessel_j0(1.0) == pytest.approx(0.7651976866, abs=1e-9)

    def test_matches_series_on_small_arguments(self, rng):
        xs = rng.uniform(-8.0, 8.0, size=300)
        for x in xs:
            assert abs(bessel_j0(float(x)) - j0_series(float(x))) <= 1e-10

    def test_accuracy_up_to_200(self, rng):
        mpmath = pytest.importorskip("mpmath")
        mpmath.mp.dps = 30
        xs = np.concatenate([rng.uniform(-200, 200, size=40), [199.99, -150.5, 55.0]])
        for x in xs:
            exact = float(mpmath.besselj(0, float(x)))
            assert abs(bessel_j0(float(x)) - exact) <= 1e-10

    def test_array_input(self):
        out = bessel_j0(np.array([0.0, 1.0]))
        assert out.shape == (2,)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            bessel_j0(np.inf)
        with pytest.raises(ValueError):
            bessel_j0(np.nan)


class TestEigSymmetric:
    def test_identity(self):
        assert np.allclose(eig_symmetric(np.eye(2)), [1.0, 1.0])

    def test_swap_matrix(self):
        vals = eig_symmetric(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert np.allclose(vals, [1.0, -1.0])

    def test_symmetric_two_state_chain(self):
        # for stay probability q, P P^T has eigenvalues 1 and (2q-1)^2;
        # cross-check with the characteristic polynomial of the 2x2 matrix
        q = 0.9
        p = np.array([[q, 1 - q], [1 - q, q]])
        m = p @ p.T
        tr, det = np.trace(m), np.linalg.det(m)
        disc = np.sqrt(tr * tr - 4 * det)
        roots = sorted([(tr + disc) / 2, (tr - disc) / 2], reverse=True)
        vals = eig_symmetric(m)
        assert np.allclose(vals, roots, atol=1e-12)
        assert vals[1] == pytest.approx((2 * q - 1) ** 2, abs=1e-12)
        assert vals[0] == pytest.approx(1.0, abs=1e-12)

    def test_descending_order(self, rng):
        m = rng.standard_normal((5, 5))
        vals = eig_symmetric(m + m.T)
        assert np.all(np.diff(vals) <= 0)

    def test_trace_and_det_properties(self, rng):
        for _ in range(20):
            m = rng.standard_normal((4, 4))
            m = m + m.T
            vals = eig_symmetric(m)
            assert np.sum(vals) == pytest.approx(np.trace(m), abs=1e-9)
            det = np.linalg.det(m)
            assert np.prod(vals) == pytest.approx(det, rel=1e-8, abs=1e-10)

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            eig_symmetric(np.array([[0.0, 1.0], [0.5, 0.0]]))
        with pytest.raises(ValueError):
            eig_symmetric(np.ones((2, 3)))


class TestLogdet:
    def test_zero_matrix(self):
        assert logdet_i_plus_hermitian(np.zeros((3, 3))) == 0.0

    def test_diagonal(self):
        assert logdet_i_plus_hermitian(np.diag([1.0, 3.0])) == pytest.approx(3.0, abs=1e-12)

    def test_matches_eigenvalue_sum(self, rng):
        for _ in range(20):
            a = random_psd(rng, 3, scale=4.0)
            assert logdet_i_plus_hermitian(a) == pytest.approx(
                logdet_eig_sum(a), abs=1e-9
            )

    def test_monotone_under_rank_one_update(self, rng):
        for _ in range(10):
            a = random_psd(rng, 4)
            v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
            b = a + np.outer(v, v.conj())
            assert logdet_i_plus_hermitian(b) >= logdet_i_plus_hermitian(a) - 1e-12

    def test_rejects_non_hermitian(self, rng):
        x = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        with pytest.raises(ValueError):
            logdet_i_plus_hermitian(x)

    def test_rejects_indefinite(self):
        with pytest.raises(ValueError):
            logdet_i_plus_hermitian(np.diag([1.0, -0.5]))
