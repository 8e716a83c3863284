"""Closed-form upper bounds on the feedback goodput gain and their coefficients.

The goodput gain (ergodic goodput at delay d minus its stale-feedback
limit) admits exponential upper bounds driven by the second eigenvalue
``lam`` of the chain's multiplicative reversibilization:

* two-cell (interference-limited):  a * lam^d + b * lam^(d/2)
* zero-forcing receiver:            c * lam^(d/2)
* noise-limited single cell:        kappa * lam^(d/2)

Coefficients are weighted sums over per-state conditional goodput terms
C(.).  The default "conservative" estimate replaces the conditional
success probability inside C(.) by 1 (keeping the upper-bound property
and needing only N bins); the "exact" estimate bins Monte Carlo samples
on the full Voronoi-index tuples and is limited to small codebooks.

For the single-chain bounds the algebra yields lam^(d/2); a tighter
lam^d variant is also emitted in CSV reports for comparison (see
``zf_gain_bound_printed`` / ``noise_limited_gain_bound_printed``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MIN_BIN_COUNT = 50  # exact-mode bins thinner than this are rejected
MAX_EXACT_STATES = 8  # four-index binning is statistically infeasible above this


@dataclass(frozen=True)
class BoundCoefficients:
    """Coefficients of the closed-form gain bounds.

    ``r`` is the severe-interference probability 1/N; inactive
    coefficients (modes that were not estimated) are zero.
    """

    lam: float
    r: float
    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    kappa: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lam must lie in [0, 1]")
        if not 0.0 < self.r <= 0.5:
            raise ValueError("r must equal 1/N for a codebook of size N >= 2")
        for name in ("a", "b", "c", "kappa"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


def two_cell_coefficients(table, pi, severe_cross_weight=None):
    """Coefficients (a, b) of the two-cell bound from a conditional table.

    ``table`` is the N^4 array of conditional goodput terms indexed
    ``[k10, k1D, k20, k2D]`` (current desired, delayed desired, current
    interferer, delayed interferer); ``pi`` the stationary weights.  With
    r = 1/N:

        a = r * sum_{k1D,k2D} max_{k10,k20} C * sqrt(pi_k1D pi_k2D)
        b = w * sum_{k1D,k10,k2D} max_{k20} C * pi_k10 pi_k1D sqrt(pi_k2D)
              + sum_{k1D,k2D,k20} max_{k10} C * sqrt(pi_k1D) pi_k20 pi_k2D

    where the cross-term weight w defaults to r (single-stream bound); the
    spatial-multiplexing variant uses w = 1 - r.  Both variants are kept
    as published even though the same derivation yields r in both cases
    (with w <= 1 either choice preserves the upper-bound property).  With
    uniform pi the sums reduce to the scalar forms (weights pi and
    pi^2 sqrt(pi)).
    """
    table = np.asarray(table, dtype=float)
    n = table.shape[0]
    if table.shape != (n, n, n, n):
        raise ValueError("table must be N x N x N x N")
    if n < 2:
        raise ValueError("need a codebook of size N >= 2")
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (n,):
        raise ValueError("pi has the wrong length")
    r = 1.0 / n
    if severe_cross_weight is None:
        severe_cross_weight = r
    sqrt_pi = np.sqrt(pi)
    a = r * float(np.einsum("bd,b,d->", table.max(axis=(0, 2)), sqrt_pi, sqrt_pi))
    b_cross = float(np.einsum("abd,a,b,d->", table.max(axis=2), pi, pi, sqrt_pi))
    b_main = float(np.einsum("bcd,b,c,d->", table.max(axis=0), sqrt_pi, pi, pi))
    return a, severe_cross_weight * b_cross + b_main


def single_chain_coefficient(table, pi):
    """sum_{k1D} sqrt(pi_k1D) max_{k10} C for a table indexed [k1D, k10]."""
    table = np.asarray(table, dtype=float)
    n = table.shape[0]
    if table.shape != (n, n):
        raise ValueError("table must be N x N")
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (n,):
        raise ValueError("pi has the wrong length")
    return float(np.sqrt(pi) @ table.max(axis=1))


def two_cell_gain_bound(coeffs: BoundCoefficients, d):
    """Two-cell gain bound a*lam^d + b*lam^(d/2)."""
    d = np.asarray(d, dtype=float)
    out = coeffs.a * coeffs.lam**d + coeffs.b * coeffs.lam ** (d / 2.0)
    return float(out) if out.ndim == 0 else out


def zf_gain_bound(coeffs: BoundCoefficients, d):
    """Zero-forcing gain bound c*lam^(d/2)."""
    d = np.asarray(d, dtype=float)
    out = coeffs.c * coeffs.lam ** (d / 2.0)
    return float(out) if out.ndim == 0 else out


def zf_gain_bound_printed(coeffs: BoundCoefficients, d):
    """Tighter lam^d variant of the ZF bound, emitted for comparison."""
    d = np.asarray(d, dtype=float)
    out = coeffs.c * coeffs.lam**d
    return float(out) if out.ndim == 0 else out


def noise_limited_gain_bound(coeffs: BoundCoefficients, d):
    """Noise-limited gain bound kappa*lam^(d/2)."""
    d = np.asarray(d, dtype=float)
    out = coeffs.kappa * coeffs.lam ** (d / 2.0)
    return float(out) if out.ndim == 0 else out


def noise_limited_gain_bound_printed(coeffs: BoundCoefficients, d):
    """Tighter lam^d variant of the noise-limited bound."""
    d = np.asarray(d, dtype=float)
    out = coeffs.kappa * coeffs.lam**d
    return float(out) if out.ndim == 0 else out


def binned_mean(flat_bins, values, n_bins, min_count):
    """Per-bin means with a hard floor on the bin population."""
    counts = np.bincount(flat_bins, minlength=n_bins)
    if counts.min() < min_count:
        raise ValueError(
            f"insufficient samples per bin in exact mode: "
            f"thinnest bin has {int(counts.min())} < {min_count}"
        )
    sums = np.bincount(flat_bins, weights=values, minlength=n_bins)
    return sums / counts


def conditional_table_two_cell(k10, k1d, k20, k2d, values, n_states, min_count=MIN_BIN_COUNT):
    """Exact N^4 conditional-mean table over the four Voronoi indices."""
    flat = (
        ((np.asarray(k10) - 1) * n_states + (np.asarray(k1d) - 1)) * n_states
        + (np.asarray(k20) - 1)
    ) * n_states + (np.asarray(k2d) - 1)
    means = binned_mean(flat, values, n_states**4, min_count)
    return means.reshape(n_states, n_states, n_states, n_states)


def conditional_table_single(k1d, k10, values, n_states, min_count=MIN_BIN_COUNT):
    """Exact N^2 conditional-mean table indexed [k1D, k10]."""
    flat = (np.asarray(k1d) - 1) * n_states + (np.asarray(k10) - 1)
    means = binned_mean(flat, values, n_states**2, min_count)
    return means.reshape(n_states, n_states)


def conservative_rate_table(k1d, r_tx, n_states):
    """Per-state mean transmit rate E[r_tx | k1D] (success probability -> 1)."""
    flat = np.asarray(k1d) - 1
    counts = np.bincount(flat, minlength=n_states)
    if counts.min() < 1:
        raise ValueError("some feedback state was never visited")
    sums = np.bincount(flat, weights=r_tx, minlength=n_states)
    return sums / counts


def estimate_coefficients(scenario, mode=None, conservative=None, d_ref=None):
    """Estimate bound coefficients by simulating the scenario.

    ``mode`` is one of ``beam``, ``precoded``, ``zf``, ``noise_limited``
    (default: derived from the scenario).  ``conservative`` overrides the
    scenario's coefficient mode.  Exact estimation conditions on the full
    index tuples and therefore needs a reference delay ``d_ref >= 1``
    (default: smallest positive delay of the scenario grid).
    """
    from .harness import SimulationContext  # deferred: harness builds on bounds

    ctx = SimulationContext(scenario)
    return coefficients_from_context(ctx, mode=mode, conservative=conservative, d_ref=d_ref)


def coefficients_from_context(ctx, mode=None, conservative=None, d_ref=None):
    """Bound coefficients from an existing simulation context."""
    config = ctx.config
    if mode is None:
        mode = config.bound_mode
    if mode not in ("beam", "precoded", "zf", "noise_limited"):
        raise ValueError(f"unknown coefficient mode {mode!r}")
    if conservative is None:
        conservative = config.coeff_mode == "conservative"
    n = ctx.n_states
    pi = ctx.pi_weights
    lam = ctx.lam
    r = 1.0 / n

    if conservative:
        rate_by_state = conservative_rate_table(ctx.idx_desired, ctx.r_tx_full, n)
        if mode in ("beam", "precoded"):
            table = np.broadcast_to(rate_by_state[None, :, None, None], (n,) * 4)
            weight = r if mode == "beam" else 1.0 - r
            a, b = two_cell_coefficients(table, pi, severe_cross_weight=weight)
            return BoundCoefficients(lam=lam, r=r, a=a, b=b)
        coeff = single_chain_coefficient(
            np.broadcast_to(rate_by_state[:, None], (n, n)), pi
        )
        if mode == "zf":
            return BoundCoefficients(lam=lam, r=r, c=coeff)
        return BoundCoefficients(lam=lam, r=r, kappa=coeff)

    if mode in ("beam", "precoded") and n > MAX_EXACT_STATES:
        raise ValueError(
            f"exact four-index binning needs N <= {MAX_EXACT_STATES}, got {n}"
        )
    if mode in ("zf", "noise_limited") and config.mode != "beam":
        raise ValueError(f"exact {mode} estimation is defined for beamforming scenarios")
    if d_ref is None:
        positive = [d for d in config.delays if d >= 1]
        d_ref = positive[0] if positive else 1
    if d_ref < 1:
        raise ValueError("exact estimation needs a reference delay >= 1")
    ev = ctx.eval_delay(d_ref, want_gains=True)

    if mode in ("beam", "precoded"):
        values = ev.r_tx * (ev.r_tx <= ev.r_rx)
        table = conditional_table_two_cell(
            ev.k10, ev.k1d, ev.k20, ev.k2d, values, n
        )
        weight = r if mode == "beam" else 1.0 - r
        a, b = two_cell_coefficients(table, pi, severe_cross_weight=weight)
        return BoundCoefficients(lam=lam, r=r, a=a, b=b)

    if mode == "zf":
        from .link import zf_outage_complement

        ratio = ev.gain_delayed / (config.params.snr * ev.gain_current)
        values = ev.r_tx * zf_outage_complement(ratio, config.params.n_rx)
        table = conditional_table_single(ev.k1d, ev.k10, values, n)
        return BoundCoefficients(lam=lam, r=r, c=single_chain_coefficient(table, pi))

    # noise-limited: success measured against the interference-free receiver
    r_rx_nl = np.log2(1.0 + config.params.snr * ev.gain_current)
    values = ev.r_tx * (ev.r_tx <= r_rx_nl)
    table = conditional_table_single(ev.k1d, ev.k10, values, n)
    return BoundCoefficients(lam=lam, r=r, kappa=single_chain_coefficient(table, pi))
