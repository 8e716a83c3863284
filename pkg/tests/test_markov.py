import numpy as np
import pytest

from lfsim.codebook import builtin_codebook_path, load_codebook
from lfsim.harness import estimate_chain, estimate_chain_from_indices
from lfsim.markov import (
    StochasticMatrix,
    convergence_deviation,
    convergence_margin,
    estimate_transition_matrix,
    matrix_power,
    read_matrix_csv,
    reversibilization,
    second_eigenvalue,
    stationary_distribution,
    write_matrix_csv,
)

from oracles import random_stochastic


def chain(entries):
    return StochasticMatrix(np.asarray(entries, dtype=float))


class TestEstimateTransitionMatrix:
    def test_alternating_sequence(self):
        p = estimate_transition_matrix([1, 2, 1, 2, 1, 2], 2)
        assert np.allclose(p.entries, [[0, 1], [1, 0]])

    def test_unvisited_row_becomes_uniform(self):
        p = estimate_transition_matrix([1, 1, 1, 1], 2)
        assert np.allclose(p.entries, [[1, 0], [0.5, 0.5]])

    def test_iid_uniform_states(self, rng):
        seq = rng.integers(1, 5, size=1_000_000)
        p = estimate_transition_matrix(seq, 4)
        assert np.max(np.abs(p.entries - 0.25)) <= 0.01

    def test_state_out_of_range(self):
        with pytest.raises(ValueError):
            estimate_transition_matrix([1, 3], 2)
        with pytest.raises(ValueError):
            estimate_transition_matrix([0, 1], 2)

    def test_needs_two_samples(self):
        with pytest.raises(ValueError):
            estimate_transition_matrix([1], 2)


class TestStationaryDistribution:
    def test_uniform_chain(self):
        pi = stationary_distribution(chain(np.full((4, 4), 0.25)))
        assert np.allclose(pi, 0.25, atol=1e-12)

    def test_swap_chain_by_symmetry(self):
        pi = stationary_distribution(chain([[0, 1], [1, 0]]))
        assert np.allclose(pi, [0.5, 0.5], atol=1e-12)

    def test_random_chain_self_consistency(self, rng):
        for _ in range(10):
            p = chain(random_stochastic(rng, 4))
            pi = stationary_distribution(p)
            assert np.max(np.abs(pi @ p.entries - pi)) <= 1e-9

    def test_reducible_chain_rejected(self):
        with pytest.raises(ValueError):
            stationary_distribution(chain([[1, 0], [0, 1]]))


class TestMatrixPower:
    def test_zeroth_power_is_identity(self, rng):
        p = chain(random_stochastic(rng, 3))
        assert np.allclose(matrix_power(p, 0).entries, np.eye(3))

    def test_first_power(self, rng):
        p = chain(random_stochastic(rng, 3))
        assert np.allclose(matrix_power(p, 1).entries, p.entries)

    def test_uniform_is_idempotent(self):
        p = chain(np.full((3, 3), 1 / 3))
        for d in (1, 2, 7):
            assert np.allclose(matrix_power(p, d).entries, p.entries, atol=1e-12)

    def test_rows_stay_stochastic(self, rng):
        p = chain(random_stochastic(rng, 5))
        out = matrix_power(p, 40)
        assert np.max(np.abs(out.entries.sum(axis=1) - 1.0)) <= 1e-8

    def test_negative_power_rejected(self, rng):
        with pytest.raises(ValueError):
            matrix_power(chain(random_stochastic(rng, 3)), -1)


class TestReversibilization:
    def test_uniform_pi_reduces_to_ppt(self, rng):
        # doubly stochastic example keeps uniform stationary
        p = chain([[0.5, 0.3, 0.2], [0.2, 0.5, 0.3], [0.3, 0.2, 0.5]])
        pi = np.full(3, 1 / 3)
        m = reversibilization(p, pi)
        assert np.allclose(m, p.entries @ p.entries.T, atol=1e-12)

    def test_symmetric_chain_gives_p_squared(self):
        p = chain([[0.7, 0.3], [0.3, 0.7]])
        m = reversibilization(p, np.array([0.5, 0.5]))
        assert np.allclose(m, p.entries @ p.entries, atol=1e-12)

    def test_two_state_example(self):
        p = chain([[0.9, 0.1], [0.1, 0.9]])
        m = reversibilization(p, np.array([0.5, 0.5]))
        assert np.allclose(m, [[0.82, 0.18], [0.18, 0.82]], atol=1e-12)

    def test_spectrum_matches_general_pi(self, rng):
        # eigenvalues of the symmetrized form equal those of P @ Ptilde
        p = chain(random_stochastic(rng, 4))
        pi = stationary_distribution(p)
        m = reversibilization(p, pi)
        ptilde = (pi[None, :] * p.entries.T) / pi[:, None]
        raw = np.sort(np.real(np.linalg.eigvals(p.entries @ ptilde)))
        sym = np.sort(np.linalg.eigvalsh(m))
        assert np.allclose(raw, sym, atol=1e-9)

    def test_non_stationary_pi_rejected(self, rng):
        p = chain(random_stochastic(rng, 3))
        with pytest.raises(ValueError):
            reversibilization(p, np.array([0.7, 0.2, 0.1]))


class TestSecondEigenvalue:
    def test_uniform_chain_has_zero(self):
        p = chain(np.full((4, 4), 0.25))
        m = reversibilization(p, np.full(4, 0.25))
        assert second_eigenvalue(m) == pytest.approx(0.0, abs=1e-12)

    def test_two_state_closed_form(self):
        q = 0.9
        p = chain([[q, 1 - q], [1 - q, q]])
        m = reversibilization(p, np.array([0.5, 0.5]))
        assert second_eigenvalue(m) == pytest.approx((2 * q - 1) ** 2, abs=1e-12)

    def test_broken_pair_rejected(self):
        with pytest.raises(ValueError):
            second_eigenvalue(np.diag([0.9, 0.5]))


class TestConvergenceDeviation:
    def test_uniform_chain_is_exact(self):
        p = chain(np.full((3, 3), 1 / 3))
        for d in (1, 5, 20):
            assert convergence_deviation(p, d, 1) == pytest.approx(0.0, abs=1e-12)

    def test_identity_chain_still_defined(self):
        p = chain(np.eye(2))
        for d in (1, 4, 9):
            assert convergence_deviation(p, d, 1) == pytest.approx(1.0, abs=1e-12)

    def test_inequality_on_random_chains(self, rng):
        for _ in range(10):
            p = chain(random_stochastic(rng, 5))
            pi = stationary_distribution(p)
            lam = second_eigenvalue(reversibilization(p, pi))
            assert convergence_margin(p, pi, lam, d_max=50) <= 1e-9

    def test_rows_converge_with_power(self, rng):
        p = chain(random_stochastic(rng, 4))
        pi = stationary_distribution(p)
        late = max(convergence_deviation(p, 40, l, pi=pi) for l in (1, 2, 3, 4))
        early = max(convergence_deviation(p, 5, l, pi=pi) for l in (1, 2, 3, 4))
        assert late <= early

    def test_state_validation(self, rng):
        p = chain(random_stochastic(rng, 3))
        with pytest.raises(ValueError):
            convergence_deviation(p, 1, 0)
        with pytest.raises(ValueError):
            convergence_deviation(p, 1, 4)


class TestQuantizedChains:
    def test_lambda_decreases_with_doppler(self):
        cb = load_codebook(builtin_codebook_path("beam_nt2_n4"), "beam")
        lams = [
            estimate_chain(cb, fd_ts=fd, n_transitions=100_000, seed=11, n_rx=2).lam
            for fd in (0.02, 0.05, 0.1)
        ]
        assert lams[0] > lams[1] > lams[2]

    def test_phase_rotation_codebook_is_near_uniform(self, recwarn):
        cb = load_codebook(builtin_codebook_path("beam_nt2_n8"), "beam")
        ch = estimate_chain(cb, fd_ts=0.1, n_transitions=200_000, seed=12, n_rx=2)
        assert np.max(np.abs(ch.pi - 1 / 8)) <= 0.1 / 8

    def test_skewed_chain_warns(self, rng):
        # states drawn non-uniformly: stationary distribution far from 1/N
        seq = np.where(rng.random(20_000) < 0.7, 1, rng.integers(2, 5, size=20_000))
        with pytest.warns(UserWarning, match="not equal-volume"):
            estimate_chain_from_indices(seq, 4)


class TestSerialization:
    def test_round_trip(self, rng, tmp_path):
        p = chain(random_stochastic(rng, 4))
        path = tmp_path / "p.csv"
        write_matrix_csv(p, path)
        header = path.read_text().splitlines()[0]
        assert header == "# n_states=4"
        back = read_matrix_csv(path)
        assert np.array_equal(back.entries, p.entries)

    def test_validation(self):
        with pytest.raises(ValueError):
            chain([[0.5, 0.4], [0.5, 0.5]])  # row sum != 1
        with pytest.raises(ValueError):
            chain([[1.1, -0.1], [0.5, 0.5]])  # negative entry
