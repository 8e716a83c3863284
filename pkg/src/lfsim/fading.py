"""Temporally correlated Rayleigh MIMO fading traces.

Every antenna-pair entry of the channel matrix is an independent,
zero-mean, unit-variance complex Gaussian process whose autocorrelation
follows Clarke's model, r(k) = J0(2*pi*fd_ts*k).  Traces are synthesized
in the frequency domain: white complex Gaussian samples are shaped by the
square root of the Doppler spectrum and transformed with an inverse FFT.
Each DFT bin carries the *integral* of the spectrum over the bin, so the
band-edge singularity of the spectrum contributes its finite mass instead
of a divergent point value.

Trace dump format (plain text): a header line ``nr nt fd_ts length seed``
followed by one line per sample holding nr*nt whitespace-separated
``re im`` pairs in row-major antenna order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import next_fast_len

from .numerics import bessel_j0


def min_trace_length(fd_ts):
    """Shortest admissible trace for the spectral method at this Doppler.

    The synthesis grid needs at least a handful of bins across the Doppler
    band (grid >= 8/fd_ts) and the band edge must stay at least half a bin
    away from the folding frequency.
    """
    if not 0.0 < fd_ts < 0.5:
        raise ValueError("fd_ts must lie in (0, 0.5)")
    return int(np.ceil(max(8.0 / fd_ts, 0.5 / (0.5 - fd_ts))))


@dataclass(frozen=True)
class FadingSpec:
    """Parameters of one MIMO fading trace."""

    n_rx: int
    n_tx: int
    fd_ts: float
    length: int
    seed: int

    def __post_init__(self):
        if self.n_rx < 1 or self.n_tx < 1:
            raise ValueError("antenna counts must be >= 1")
        if not 0.0 < self.fd_ts < 0.5:
            raise ValueError("fd_ts must lie in (0, 0.5)")
        if self.length < 1:
            raise ValueError("length must be >= 1")


@dataclass(frozen=True)
class ChannelTrace:
    """A time-indexed sequence of complex n_rx x n_tx channel matrices."""

    spec: FadingSpec
    samples: np.ndarray  # (length, n_rx, n_tx) complex128

    def __post_init__(self):
        expected = (self.spec.length, self.spec.n_rx, self.spec.n_tx)
        if self.samples.shape != expected:
            raise ValueError(f"trace shape {self.samples.shape} != {expected}")
        self.samples.flags.writeable = False

    def __len__(self):
        return self.spec.length


def target_autocorrelation(lag, fd_ts):
    """Clarke-model autocorrelation J0(2*pi*fd_ts*lag) at integer lag >= 0."""
    lag_arr = np.asarray(lag)
    if np.any(lag_arr < 0):
        raise ValueError("lag must be >= 0")
    if fd_ts < 0.0:
        raise ValueError("fd_ts must be >= 0")
    return bessel_j0(2.0 * np.pi * fd_ts * lag_arr)


def _spectrum_bin_masses(grid, fd_ts):
    """Integral of the normalized Doppler spectrum over each DFT bin.

    The spectrum 1/(pi*fd*sqrt(1-(f/fd)^2)) on |f| < fd has closed-form
    primitive arcsin(f/fd)/pi, so the masses are exact and sum to one.
    """
    freqs = np.fft.fftfreq(grid)
    half = 0.5 / grid
    lo = np.clip((freqs - half) / fd_ts, -1.0, 1.0)
    hi = np.clip((freqs + half) / fd_ts, -1.0, 1.0)
    return (np.arcsin(hi) - np.arcsin(lo)) / np.pi


def generate_trace(spec: FadingSpec) -> ChannelTrace:
    """Generate a correlated Rayleigh trace, deterministic in (spec, seed).

    Each of the n_rx*n_tx entry processes is synthesized independently on a
    common spectral grid and trimmed to the requested length.
    """
    floor = min_trace_length(spec.fd_ts)
    if spec.length < floor:
        raise ValueError(
            f"length {spec.length} too short for fd_ts={spec.fd_ts}: "
            f"the spectral grid needs at least {floor} samples"
        )
    grid = next_fast_len(spec.length)
    amp = np.sqrt(_spectrum_bin_masses(grid, spec.fd_ts))
    rng = np.random.default_rng(spec.seed)
    out = np.empty((spec.length, spec.n_rx, spec.n_tx), dtype=np.complex128)
    for row in range(spec.n_rx):
        for col in range(spec.n_tx):
            shaped = amp * (
                (rng.standard_normal(grid) + 1j * rng.standard_normal(grid))
                / np.sqrt(2.0)
            )
            out[:, row, col] = (np.fft.ifft(shaped) * grid)[: spec.length]
    return ChannelTrace(spec, out)


def empirical_autocorrelation(trace: ChannelTrace, lag: int) -> float:
    """Sample autocorrelation at one lag, averaged over all matrix entries.

    Each lag uses the mean over its available sample pairs and the result
    is normalized by the lag-0 value, so a constant trace reports exactly
    1.0 at every admissible lag.  Returns the real part.
    """
    length = trace.spec.length
    if not 0 <= lag < length / 10.0:
        raise ValueError(f"lag must satisfy 0 <= lag < length/10 = {length / 10.0}")
    flat = trace.samples.reshape(length, -1)
    power = float(np.mean(np.abs(flat) ** 2))
    if lag == 0:
        return 1.0
    num = complex(np.mean(flat[lag:] * np.conj(flat[:-lag])))
    return float(np.real(num / power))


def write_trace(trace: ChannelTrace, path) -> None:
    """Dump a trace in the documented text format."""
    spec = trace.spec
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"{spec.n_rx} {spec.n_tx} {float(spec.fd_ts)!r} {spec.length} {spec.seed}\n"
        )
        flat = trace.samples.reshape(spec.length, -1)
        for row in flat:
            parts = []
            for val in row:
                parts.append(f"{float(val.real)!r} {float(val.imag)!r}")
            fh.write(" ".join(parts) + "\n")


def read_trace(path) -> ChannelTrace:
    """Load a trace dumped by :func:`write_trace`."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 5:
            raise ValueError("trace header must be 'nr nt fd_ts length seed'")
        n_rx, n_tx = int(header[0]), int(header[1])
        fd_ts = float(header[2])
        length, seed = int(header[3]), int(header[4])
        data = np.loadtxt(fh, dtype=float, ndmin=2)
    if data.shape != (length, 2 * n_rx * n_tx):
        raise ValueError(f"trace body shape {data.shape} does not match header")
    cplx = data[:, 0::2] + 1j * data[:, 1::2]
    spec = FadingSpec(n_rx=n_rx, n_tx=n_tx, fd_ts=fd_ts, length=length, seed=seed)
    return ChannelTrace(spec, cplx.reshape(length, n_rx, n_tx))
