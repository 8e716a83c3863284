import numpy as np
import pytest
from scipy import stats

from lfsim.codebook import BeamCodebook, quantize_beam, quantize_beam_trace
from lfsim.link import (
    ScenarioParams,
    goodput_sample,
    rx_rate_mrc,
    sin2_angle,
    sm_rx_rate,
    sm_tx_rate,
    tx_rate_beam,
    zf_outage_complement,
    zf_rx_rate,
)

from oracles import logdet_eig_sum, mrc_rate_scalar


def params(alpha1=8.0, alpha2=8.0, n0=1.0, n_tx=4, n_rx=4, n_streams=1, noise_mode="expected"):
    return ScenarioParams(
        alpha1=alpha1, alpha2=alpha2, n0=n0, n_tx=n_tx, n_rx=n_rx,
        n_streams=n_streams, noise_mode=noise_mode,
    )


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


class TestTxRateBeam:
    def test_identity_channel(self):
        assert tx_rate_beam(np.eye(2), np.array([1.0, 0.0])) == pytest.approx(1.0)

    def test_zero_channel(self):
        assert tx_rate_beam(np.zeros((2, 2)), np.array([1.0, 0.0])) == 0.0

    def test_quantized_beam_reaches_best_gain(self, rng):
        vecs = np.linalg.qr(crandn(rng, 4, 4))[0].T
        cb = BeamCodebook(n_tx=4, vectors=vecs)
        h = crandn(rng, 4, 4)
        idx = quantize_beam(h, cb)
        rate = tx_rate_beam(h, cb.vectors[idx - 1])
        best = max(np.linalg.norm(h @ v) ** 2 for v in cb.vectors)
        assert rate == pytest.approx(np.log2(1 + best), rel=1e-12)

    def test_snr_scale(self):
        assert tx_rate_beam(np.eye(2), np.array([1.0, 0.0]), snr_scale=3.0) == pytest.approx(2.0)

    def test_non_unit_beam_rejected(self):
        with pytest.raises(ValueError):
            tx_rate_beam(np.eye(2), np.array([1.0, 1.0]))


class TestRxRateMrc:
    def test_unit_sinr(self):
        p = params(alpha1=2.0, alpha2=0.0, n_tx=2, n_rx=2)
        rate = rx_rate_mrc(np.eye(2), np.array([1.0, 0.0]), None, None, p)
        assert rate == pytest.approx(1.0)

    def test_orthogonal_interference_costs_nothing(self, rng):
        p = params(n_tx=2, n_rx=2)
        h = np.eye(2)
        f1 = np.array([1.0, 0.0])
        # effective interference e2 = G f2 lands on e2-axis, orthogonal to H f1
        g = np.array([[0.0, 0.0], [1.0, 0.0]])
        f2 = np.array([1.0, 0.0])
        with_interf = rx_rate_mrc(h, f1, g, f2, p)
        p0 = params(alpha2=0.0, n_tx=2, n_rx=2)
        assert with_interf == pytest.approx(rx_rate_mrc(h, f1, None, None, p0), rel=1e-12)

    def test_matches_scalar_oracle(self, rng):
        p = params(alpha1=5.0, alpha2=3.0, n0=0.7, n_tx=4, n_rx=3)
        for _ in range(25):
            h, g = crandn(rng, 3, 4), crandn(rng, 3, 4)
            f1 = crandn(rng, 4)
            f1 /= np.linalg.norm(f1)
            f2 = crandn(rng, 4)
            f2 /= np.linalg.norm(f2)
            expect = mrc_rate_scalar(h, f1, g, f2, 5.0, 3.0, 0.7, 4)
            assert rx_rate_mrc(h, f1, g, f2, p) == pytest.approx(expect, abs=1e-12)

    def test_sampled_noise_oracle(self, rng):
        p = params(alpha1=5.0, alpha2=3.0, n0=0.7, n_tx=4, n_rx=3, noise_mode="sampled")
        h, g = crandn(rng, 3, 4), crandn(rng, 3, 4)
        f1 = crandn(rng, 4); f1 /= np.linalg.norm(f1)
        f2 = crandn(rng, 4); f2 /= np.linalg.norm(f2)
        v = crandn(rng, 3)
        expect = mrc_rate_scalar(h, f1, g, f2, 5.0, 3.0, 0.7, 4, noise=v)
        assert rx_rate_mrc(h, f1, g, f2, p, noise=v) == pytest.approx(expect, abs=1e-12)

    def test_noise_mode_argument_consistency(self, rng):
        h = crandn(rng, 2, 2)
        f = np.array([1.0, 0.0])
        with pytest.raises(ValueError):
            rx_rate_mrc(h, f, None, None, params(alpha2=0, n_tx=2, n_rx=2, noise_mode="sampled"))
        with pytest.raises(ValueError):
            rx_rate_mrc(h, f, None, None, params(alpha2=0, n_tx=2, n_rx=2), noise=np.zeros(2))

    def test_nonincreasing_in_interference_power(self, rng):
        h, g = crandn(rng, 3, 3), crandn(rng, 3, 3)
        f1 = crandn(rng, 3); f1 /= np.linalg.norm(f1)
        f2 = crandn(rng, 3); f2 /= np.linalg.norm(f2)
        rates = [
            rx_rate_mrc(h, f1, g, f2, params(alpha2=a2, n_tx=3, n_rx=3))
            for a2 in (0.0, 1.0, 4.0, 16.0)
        ]
        assert all(r1 >= r2 for r1, r2 in zip(rates, rates[1:]))

    def test_zero_channel_gives_zero_rate(self):
        p = params(n_tx=2, n_rx=2)
        rate = rx_rate_mrc(np.zeros((2, 2)), np.array([1.0, 0.0]),
                           np.eye(2), np.array([1.0, 0.0]), p)
        assert rate == 0.0


class TestSin2Angle:
    def test_orthogonal(self):
        assert sin2_angle(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 1.0

    def test_parallel(self):
        v = np.array([1.0 + 1j, 2.0])
        assert sin2_angle(v, 3 * v) == pytest.approx(0.0, abs=1e-12)

    def test_45_degrees(self):
        h = np.array([1.0, 1.0]) / np.sqrt(2)
        assert sin2_angle(h, np.array([1.0, 0.0])) == pytest.approx(0.5, rel=1e-12)

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            sin2_angle(np.zeros(2), np.array([1.0, 0.0]))

    def test_beta_distribution(self, rng):
        # angle between independent isotropic vectors: sin^2 ~ Beta(nr-1, 1)
        for nr in (2, 3, 4):
            h = crandn(rng, 100_000, nr)
            g = crandn(rng, 100_000, nr)
            s2 = sin2_angle(h, g)
            assert stats.kstest(s2, "beta", args=(nr - 1, 1)).statistic <= 0.01


class TestZfRxRate:
    def test_parallel_interference_kills_rate(self):
        p = params(n_tx=2, n_rx=2)
        h = np.eye(2)
        g = np.eye(2)
        f = np.array([1.0, 0.0])
        assert zf_rx_rate(h, f, g, f, p) == pytest.approx(0.0, abs=1e-12)

    def test_orthogonal_interference_is_noise_limited(self):
        p = params(alpha1=8.0, n_tx=2, n_rx=2)
        h = np.eye(2)
        f = np.array([1.0, 0.0])
        g = np.array([[0.0, 0.0], [1.0, 0.0]])
        rate = zf_rx_rate(h, f, g, f, p)
        assert rate == pytest.approx(np.log2(1 + p.snr * 1.0), rel=1e-12)

    def test_never_exceeds_noise_limited(self, rng):
        p = params(n_tx=3, n_rx=3)
        for _ in range(25):
            h, g = crandn(rng, 3, 3), crandn(rng, 3, 3)
            f1 = crandn(rng, 3); f1 /= np.linalg.norm(f1)
            f2 = crandn(rng, 3); f2 /= np.linalg.norm(f2)
            gain = np.linalg.norm(h @ f1) ** 2
            assert zf_rx_rate(h, f1, g, f2, p) <= np.log2(1 + p.snr * gain) + 1e-12

    def test_needs_two_receive_antennas(self):
        p = params(n_tx=2, n_rx=1, n_streams=1)
        with pytest.raises(ValueError):
            zf_rx_rate(np.ones((1, 2)), np.array([1.0, 0.0]),
                       np.ones((1, 2)), np.array([1.0, 0.0]), p)


class TestZfOutageComplement:
    def test_unreachable_rate(self):
        assert zf_outage_complement(1.0, 2) == 0.0
        assert zf_outage_complement(3.7, 4) == 0.0

    def test_uniform_case(self):
        assert zf_outage_complement(0.25, 2) == pytest.approx(0.75)

    def test_beta_tail(self):
        assert zf_outage_complement(0.5, 4) == pytest.approx(0.875)

    def test_negative_ratio_rejected(self):
        with pytest.raises(ValueError):
            zf_outage_complement(-0.1, 2)


class TestSmRates:
    def test_tx_zero_channel(self, basis_precoder_4):
        p = params(n_streams=2)
        assert sm_tx_rate(np.zeros((4, 4)), basis_precoder_4.matrices[0], p) == 0.0

    def test_tx_single_stream_matches_beam(self, rng):
        p = params(n_streams=1)
        h = crandn(rng, 4, 4)
        f = crandn(rng, 4)
        f /= np.linalg.norm(f)
        assert sm_tx_rate(h, f[:, None], p) == pytest.approx(
            tx_rate_beam(h, f), rel=1e-12
        )

    def test_tx_matches_eigenvalue_sum(self, rng, basis_precoder_4):
        p = params(n_streams=2)
        h = crandn(rng, 4, 4)
        eff = h @ (basis_precoder_4.matrices[1] / np.sqrt(2))
        expect = logdet_eig_sum(eff @ eff.conj().T)
        assert sm_tx_rate(h, basis_precoder_4.matrices[1], p) == pytest.approx(expect, abs=1e-9)

    def test_rx_no_interference(self, rng, basis_precoder_4):
        p = params(alpha2=0.0, n_streams=2)
        h = crandn(rng, 4, 4)
        f = basis_precoder_4.matrices[0]
        eff = h @ (f / np.sqrt(2))
        k1 = p.snr * (eff @ eff.conj().T)
        assert sm_rx_rate(h, f, None, None, p) == pytest.approx(logdet_eig_sum(k1), abs=1e-9)

    def test_rx_zero_channel(self, rng, basis_precoder_4):
        p = params(n_streams=2)
        g = crandn(rng, 4, 4)
        rate = sm_rx_rate(np.zeros((4, 4)), basis_precoder_4.matrices[0],
                          g, basis_precoder_4.matrices[1], p)
        assert rate == pytest.approx(0.0, abs=1e-12)

    def test_rx_matches_determinant_identity(self, rng, basis_precoder_4):
        p = params(alpha1=6.0, alpha2=4.0, n_streams=2)
        for _ in range(20):
            h, g = crandn(rng, 4, 4), crandn(rng, 4, 4)
            f1, f2 = basis_precoder_4.matrices
            e1 = h @ (f1 / np.sqrt(2))
            e2 = g @ (f2 / np.sqrt(2))
            k1 = p.snr * (e1 @ e1.conj().T)
            ki = np.eye(4) + (p.alpha2 / (p.n_tx * p.n0)) * (e2 @ e2.conj().T)
            expect = np.log2(np.real(np.linalg.det(ki + k1))) - np.log2(
                np.real(np.linalg.det(ki))
            )
            assert sm_rx_rate(h, f1, g, f2, p) == pytest.approx(expect, abs=1e-9)

    def test_rx_batched_equals_scalar(self, rng, basis_precoder_4):
        p = params(n_streams=2)
        h = crandn(rng, 6, 4, 4)
        g = crandn(rng, 6, 4, 4)
        f1 = np.broadcast_to(basis_precoder_4.matrices[0], (6, 4, 2))
        f2 = np.broadcast_to(basis_precoder_4.matrices[1], (6, 4, 2))
        batch = sm_rx_rate(h, f1, g, f2, p)
        for n in range(6):
            single = sm_rx_rate(h[n], f1[n], g[n], f2[n], p)
            assert batch[n] == pytest.approx(single, abs=1e-9)


class TestGoodputSample:
    def test_success(self):
        assert goodput_sample(2.0, 3.0) == 2.0

    def test_outage(self):
        assert goodput_sample(3.0, 2.0) == 0.0

    def test_boundary_is_inclusive(self):
        assert goodput_sample(2.5, 2.5) == 2.5

    def test_never_exceeds_tx_rate(self, rng):
        r_tx = rng.uniform(0, 4, size=100)
        r_rx = rng.uniform(0, 4, size=100)
        gp = goodput_sample(r_tx, r_rx)
        assert np.all(gp <= r_tx)
        assert np.all(gp <= r_rx + 1e-15)

    def test_negative_rate_rejected(self):
        with pytest.raises(ValueError):
            goodput_sample(-0.1, 1.0)


class TestNoOutageWithFreshCsi:
    def test_goodput_equals_tx_rate(self, rng):
        # alpha2 = 0, expected noise, alpha1 >= n_tx*n0, zero delay
        p = params(alpha1=6.0, alpha2=0.0, n_tx=4, n_rx=4)
        assert p.snr >= 1.0
        vecs = np.linalg.qr(crandn(rng, 4, 4))[0].T
        cb = BeamCodebook(n_tx=4, vectors=vecs)
        h = crandn(rng, 200, 4, 4)
        idx, _ = quantize_beam_trace(h, cb)
        f = cb.vectors[idx - 1]
        r_tx = tx_rate_beam(h, f)
        r_rx = rx_rate_mrc(h, f, None, None, p)
        assert np.array_equal(goodput_sample(r_tx, r_rx), r_tx)
