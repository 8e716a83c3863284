"""Instantaneous link rates, receiver geometry, and the goodput rule.

All functions broadcast over leading sample axes: a channel argument has
shape (..., n_rx, n_tx) and a beamforming vector (..., n_tx), so the same
code path serves a single matrix or a whole Monte Carlo batch.  Rates are
in bits per channel use.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import LN2, logdet_i_plus_hermitian

UNIT_NORM_TOL = 1e-9


@dataclass(frozen=True)
class ScenarioParams:
    """Physical parameters of the two-cell link at the user of interest."""

    alpha1: float  # desired received power (linear)
    alpha2: float  # interfering received power (linear)
    n0: float  # noise power (linear)
    n_tx: int
    n_rx: int
    n_streams: int = 1
    noise_mode: str = "expected"  # "expected" or "sampled"

    def __post_init__(self):
        if self.alpha1 <= 0 or self.alpha2 < 0 or self.n0 <= 0:
            raise ValueError("need alpha1 > 0, alpha2 >= 0, n0 > 0")
        if self.n_tx < 1 or self.n_rx < 1:
            raise ValueError("antenna counts must be >= 1")
        if not 1 <= self.n_streams <= min(self.n_tx, self.n_rx):
            raise ValueError("need 1 <= n_streams <= min(n_tx, n_rx)")
        if self.noise_mode not in ("expected", "sampled"):
            raise ValueError("noise_mode must be 'expected' or 'sampled'")

    @property
    def snr(self):
        """Receive SNR p = alpha1 / (n_tx * n0)."""
        return self.alpha1 / (self.n_tx * self.n0)


def _check_unit(vec, name):
    norms = np.linalg.norm(vec, axis=-1)
    if float(np.max(np.abs(norms - 1.0))) > UNIT_NORM_TOL:
        raise ValueError(f"{name} must have unit norm")


def _effective(h, f):
    """H f for broadcast stacks of channels and vectors."""
    h = np.asarray(h, dtype=complex)
    f = np.asarray(f, dtype=complex)
    if h.shape[-1] != f.shape[-1]:
        raise ValueError("channel columns and beamformer length differ")
    return np.einsum("...ij,...j->...i", h, f)


def _maybe_scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def tx_rate_beam(h_delayed, f, snr_scale=1.0):
    """Transmit-side rate log2(1 + snr_scale * ||H f||^2).

    The transmitter sets its rate from the delayed channel and beamformer
    alone; by default no SNR or noise scaling enters (snr_scale folds the
    receive SNR in for sensitivity studies).
    """
    f = np.asarray(f, dtype=complex)
    _check_unit(f, "beamforming vector")
    gain = np.sum(np.abs(_effective(h_delayed, f)) ** 2, axis=-1)
    return _maybe_scalar(np.log2(1.0 + snr_scale * gain))


def rx_rate_mrc(h_now, f1, g_now, f2, params: ScenarioParams, noise=None):
    """Receiver mutual information with MRC combining, in bits.

    SINR = alpha1 ||H f1||^2 / (alpha2 |w* G f2|^2 + n_tx * noise_term)
    with w the MRC combiner H f1 / ||H f1||.  The noise term is the
    sampled |w* v|^2 when params.noise_mode == "sampled" (v must then be
    given, shape (..., n_rx)) and the mean noise power n0 otherwise.
    A zero effective channel yields rate 0, not an error.
    """
    f1 = np.asarray(f1, dtype=complex)
    _check_unit(f1, "f1")
    e1 = _effective(h_now, f1)
    sig = np.sum(np.abs(e1) ** 2, axis=-1)

    if params.noise_mode == "sampled":
        if noise is None:
            raise ValueError("sampled noise_mode requires a noise vector")
        noise = np.asarray(noise, dtype=complex)
        noise_cross = np.abs(np.sum(np.conj(e1) * noise, axis=-1)) ** 2
    else:
        if noise is not None:
            raise ValueError("expected noise_mode takes no noise vector")
        noise_cross = None

    if params.alpha2 > 0 and g_now is not None:
        f2 = np.asarray(f2, dtype=complex)
        _check_unit(f2, "f2")
        e2 = _effective(g_now, f2)
        interf_cross = np.abs(np.sum(np.conj(e1) * e2, axis=-1)) ** 2
    elif params.alpha2 > 0:
        raise ValueError("alpha2 > 0 requires the interfering channel")
    else:
        interf_cross = None

    if interf_cross is None and noise_cross is None:
        # interference-free, mean-noise case: SINR is exactly p * ||H f1||^2
        sinr = params.snr * sig
    else:
        # |w* x|^2 = |e1^H x|^2 / ||e1||^2
        scaled = np.zeros_like(sig)
        if interf_cross is not None:
            scaled = scaled + params.alpha2 * interf_cross
        if noise_cross is not None:
            scaled = scaled + params.n_tx * noise_cross
        with np.errstate(divide="ignore", invalid="ignore"):
            denom = np.where(sig > 0, scaled / np.where(sig > 0, sig, 1.0), 0.0)
        if noise_cross is None:
            denom = denom + params.n_tx * params.n0
        with np.errstate(divide="ignore", invalid="ignore"):
            sinr = np.where(
                (sig > 0) & (denom > 0),
                params.alpha1 * sig / np.where(denom > 0, denom, 1.0),
                0.0,
            )
    return _maybe_scalar(np.log2(1.0 + sinr))


def sin2_angle(h, g):
    """Squared sine of the angle between two nonzero vectors, in [0, 1]."""
    h = np.asarray(h, dtype=complex)
    g = np.asarray(g, dtype=complex)
    hn = np.sum(np.abs(h) ** 2, axis=-1)
    gn = np.sum(np.abs(g) ** 2, axis=-1)
    if np.any(hn == 0) or np.any(gn == 0):
        raise ValueError("sin2_angle: zero vector")
    cross = np.abs(np.sum(np.conj(h) * g, axis=-1)) ** 2
    return _maybe_scalar(np.clip(1.0 - cross / (hn * gn), 0.0, 1.0))


def zf_rx_rate(h_now, f1, g_now, f2, params: ScenarioParams):
    """Receiver rate after zero-forcing projection of the interferer.

    The desired effective channel is projected onto the complement of the
    interference direction, so the post-combining power picks up the
    sin^2 loss factor: rate = log2(1 + p ||H f1||^2 sin^2(theta)).
    Needs n_rx >= 2 (one degree of freedom spent on nulling).
    """
    if params.n_rx < 2:
        raise ValueError("zero forcing needs n_rx >= 2")
    f1 = np.asarray(f1, dtype=complex)
    f2 = np.asarray(f2, dtype=complex)
    _check_unit(f1, "f1")
    _check_unit(f2, "f2")
    e1 = _effective(h_now, f1)
    e2 = _effective(g_now, f2)
    sig = np.sum(np.abs(e1) ** 2, axis=-1)
    intp = np.sum(np.abs(e2) ** 2, axis=-1)
    cross = np.abs(np.sum(np.conj(e1) * e2, axis=-1)) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        loss = np.where(
            (sig > 0) & (intp > 0),
            np.clip(1.0 - cross / np.where(sig * intp > 0, sig * intp, 1.0), 0.0, 1.0),
            1.0,  # no interference direction: nothing to project out
        )
    return _maybe_scalar(np.log2(1.0 + params.snr * sig * loss))


def zf_outage_complement(ratio, n_rx):
    """Probability that the ZF rate reaches the transmit rate.

    ``ratio`` is ||H[n-D] f||^2 / (p ||H[n] f||^2); under the beta model of
    the projection loss the success probability is 1 - min(ratio, 1)^(n_rx-1),
    clamped so the result is always a valid probability.
    """
    if n_rx < 2:
        raise ValueError("zero forcing needs n_rx >= 2")
    ratio = np.asarray(ratio, dtype=float)
    if np.any(ratio < 0):
        raise ValueError("ratio must be >= 0")
    return _maybe_scalar(1.0 - np.clip(ratio, 0.0, 1.0) ** (n_rx - 1))


def _scaled_effective(h, f_stored, n_streams):
    """H (F/sqrt(Ns)) for stored orthonormal precoders."""
    h = np.asarray(h, dtype=complex)
    f = np.asarray(f_stored, dtype=complex) / np.sqrt(n_streams)
    if h.shape[-1] != f.shape[-2]:
        raise ValueError("channel columns and precoder rows differ")
    return np.einsum("...ij,...jk->...ik", h, f)


def _batched_logdet_bits(mat):
    sign, logdet = np.linalg.slogdet(mat)
    if np.any(np.real(sign) <= 0):
        raise ValueError("determinant not positive")
    return logdet / LN2


def sm_tx_rate(h_delayed, f_stored, params: ScenarioParams, snr_scale=1.0):
    """Transmit-side spatial multiplexing rate log2 det(I + (HF)(HF)*).

    ``f_stored`` is an orthonormal precoder; the 1/sqrt(n_streams) power
    split is applied here.  Like the beam transmit rate, no SNR scaling
    enters by default (snr_scale folds it in for sensitivity studies).
    """
    eff = _scaled_effective(h_delayed, f_stored, params.n_streams)
    gram = snr_scale * np.einsum("...ij,...ik->...jk", np.conj(eff), eff)
    if gram.ndim == 2:
        return logdet_i_plus_hermitian(gram)
    eye = np.eye(params.n_streams)
    return _batched_logdet_bits(eye + gram)


def sm_rx_rate(h_now, f1_stored, g_now, f2_stored, params: ScenarioParams):
    """Receiver spatial multiplexing rate log2 det(I + K1 K_I^{-1}).

    K1 is the desired-signal covariance, K_I the interference-plus-noise
    covariance (which includes the identity and is therefore always well
    conditioned).  The product K1 K_I^{-1} is evaluated through triangular
    solves with the Cholesky factor of K_I, never an explicit inverse.
    """
    p = params.snr
    q = params.alpha2 / (params.n_tx * params.n0)
    e1 = _scaled_effective(h_now, f1_stored, params.n_streams)
    k1 = p * np.einsum("...ij,...kj->...ik", e1, np.conj(e1))
    eye = np.eye(params.n_rx)
    if params.alpha2 > 0 and g_now is not None:
        e2 = _scaled_effective(g_now, f2_stored, params.n_streams)
        ki = eye + q * np.einsum("...ij,...kj->...ik", e2, np.conj(e2))
    elif params.alpha2 > 0:
        raise ValueError("alpha2 > 0 requires the interfering channel")
    else:
        ki = np.broadcast_to(eye, k1.shape).copy()
    chol = np.linalg.cholesky(ki)
    # B = L^{-1} K1 L^{-*} is Hermitian PSD and similar to K1 K_I^{-1}
    x = np.linalg.solve(chol, k1)
    b = np.swapaxes(np.linalg.solve(chol, np.conj(np.swapaxes(x, -1, -2))), -1, -2)
    b = 0.5 * (b + np.conj(np.swapaxes(b, -1, -2)))
    if b.ndim == 2:
        return logdet_i_plus_hermitian(b)
    return _batched_logdet_bits(eye + b)


def goodput_sample(r_tx, r_rx):
    """Goodput of one transmission: r_tx if r_tx <= r_rx (inclusive), else 0."""
    r_tx = np.asarray(r_tx, dtype=float)
    r_rx = np.asarray(r_rx, dtype=float)
    if np.any(r_tx < 0) or np.any(r_rx < 0):
        raise ValueError("rates must be >= 0")
    return _maybe_scalar(np.where(r_tx <= r_rx, r_tx, 0.0))
