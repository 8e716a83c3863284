"""Feedback codebooks and the index-selection (quantization) rules.

Codebook file format (UTF-8 text): the first non-comment line is
``N Nt Ns`` (Ns = 1 for beam codebooks); then N blocks follow, each of Nt
lines, each line holding Ns whitespace-separated ``re im`` pairs.  Lines
starting with ``#`` and blank lines are ignored.

Feedback states are 1-based codebook indices throughout the package, and
ties always resolve to the lowest index so that quantizing a given trace
is deterministic.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from importlib import resources

import numpy as np

NORM_TOL = 1e-6  # loader rejects vectors/columns further than this from unit norm


class CodebookFormatError(ValueError):
    """Raised when a codebook file cannot be parsed or validated."""


def _warn_if_not_power_of_two(n):
    if n < 2 or (n & (n - 1)) != 0:
        warnings.warn(
            f"codebook size {n} is not a power of two; the feedback state "
            "does not pack into a whole number of bits",
            stacklevel=3,
        )


@dataclass(frozen=True)
class BeamCodebook:
    """A set of N unit-norm transmit beamforming vectors of length n_tx."""

    n_tx: int
    vectors: np.ndarray  # (N, n_tx) complex128

    def __post_init__(self):
        vecs = self.vectors
        if vecs.ndim != 2 or vecs.shape[1] != self.n_tx:
            raise ValueError("vectors must have shape (N, n_tx)")
        if vecs.shape[0] < 2:
            raise ValueError("a codebook needs at least 2 entries")
        norms = np.linalg.norm(vecs, axis=1)
        if np.max(np.abs(norms - 1.0)) > 1e-9:
            raise ValueError("beam codewords must have unit norm")
        _warn_if_not_power_of_two(vecs.shape[0])
        vecs.flags.writeable = False

    @property
    def size(self):
        return self.vectors.shape[0]


@dataclass(frozen=True)
class PrecoderCodebook:
    """N precoding matrices with orthonormal columns (n_tx x n_streams).

    Matrices are stored orthonormal; the 1/sqrt(n_streams) transmit power
    split is applied where rates are evaluated, not in storage.
    """

    n_tx: int
    n_streams: int
    matrices: np.ndarray  # (N, n_tx, n_streams) complex128

    def __post_init__(self):
        mats = self.matrices
        if mats.ndim != 3 or mats.shape[1:] != (self.n_tx, self.n_streams):
            raise ValueError("matrices must have shape (N, n_tx, n_streams)")
        if mats.shape[0] < 2:
            raise ValueError("a codebook needs at least 2 entries")
        if self.n_streams < 1 or self.n_streams > self.n_tx:
            raise ValueError("need 1 <= n_streams <= n_tx")
        grams = np.einsum("nij,nik->njk", mats.conj(), mats)
        eye = np.eye(self.n_streams)
        if np.max(np.abs(grams - eye)) > 1e-9:
            raise ValueError("precoder columns must be orthonormal")
        _warn_if_not_power_of_two(mats.shape[0])
        mats.flags.writeable = False

    @property
    def size(self):
        return self.matrices.shape[0]


def _tokenize(path):
    tokens = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            tokens.extend(stripped.split())
    return tokens


def load_codebook(path, kind):
    """Load and validate a codebook file.

    ``kind`` selects ``"beam"`` (returns :class:`BeamCodebook`) or
    ``"precoder"`` (returns :class:`PrecoderCodebook`).  Norm deviations up
    to 1e-6 are renormalized exactly; anything larger is rejected.
    """
    if kind not in ("beam", "precoder"):
        raise ValueError("kind must be 'beam' or 'precoder'")
    tokens = _tokenize(path)
    if len(tokens) < 3:
        raise CodebookFormatError(f"{path}: missing 'N Nt Ns' header")
    try:
        n_codes, n_tx, n_streams = (int(t) for t in tokens[:3])
    except ValueError as exc:
        raise CodebookFormatError(f"{path}: bad header: {exc}") from None
    if n_codes < 2 or n_tx < 1 or n_streams < 1:
        raise CodebookFormatError(f"{path}: header values out of range")
    expected = 3 + 2 * n_codes * n_tx * n_streams
    if len(tokens) != expected:
        raise CodebookFormatError(
            f"{path}: expected {expected - 3} numbers after header, got {len(tokens) - 3}"
        )
    try:
        values = np.array([float(t) for t in tokens[3:]])
    except ValueError as exc:
        raise CodebookFormatError(f"{path}: bad numeric entry: {exc}") from None
    cplx = values[0::2] + 1j * values[1::2]
    mats = cplx.reshape(n_codes, n_tx, n_streams)

    norms = np.linalg.norm(mats, axis=1)  # (N, n_streams) column norms
    if np.any(np.abs(norms - 1.0) > NORM_TOL):
        raise CodebookFormatError(f"{path}: codeword column norms deviate beyond {NORM_TOL}")
    mats = mats / norms[:, None, :]

    if kind == "beam":
        if n_streams != 1:
            raise CodebookFormatError(f"{path}: beam codebooks need Ns=1, got {n_streams}")
        return BeamCodebook(n_tx=n_tx, vectors=mats[:, :, 0].copy())

    grams = np.einsum("nij,nik->njk", mats.conj(), mats)
    off = grams - np.eye(n_streams)
    if np.max(np.abs(off)) > NORM_TOL:
        raise CodebookFormatError(f"{path}: precoder columns deviate from orthonormal beyond {NORM_TOL}")
    mats = _gram_schmidt(mats)
    return PrecoderCodebook(n_tx=n_tx, n_streams=n_streams, matrices=mats)


def _gram_schmidt(mats):
    """Re-orthonormalize nearly orthonormal columns (modified Gram-Schmidt)."""
    out = mats.copy()
    for j in range(out.shape[2]):
        for i in range(j):
            proj = np.einsum("ni,ni->n", out[:, :, i].conj(), out[:, :, j])
            out[:, :, j] -= proj[:, None] * out[:, :, i]
        out[:, :, j] /= np.linalg.norm(out[:, :, j], axis=1)[:, None]
    return out


def builtin_codebook_path(name):
    """Filesystem path of a codebook shipped with the package."""
    res = resources.files("lfsim").joinpath("data", "codebooks", f"{name}.cb")
    if not res.is_file():
        raise FileNotFoundError(f"no builtin codebook named {name!r}")
    return str(res)


def min_chordal_distance(cb):
    """Smallest pairwise chordal distance between codewords.

    For beam codebooks this is sqrt(1 - |<v_i, v_j>|^2); for precoders the
    subspace version sqrt(n_streams - ||F_i* F_j||_F^2).
    """
    if isinstance(cb, BeamCodebook):
        inner = np.abs(cb.vectors.conj() @ cb.vectors.T) ** 2
        np.fill_diagonal(inner, -np.inf)
        return float(np.sqrt(max(0.0, 1.0 - inner.max())))
    cross = np.einsum("mij,nik->mnjk", cb.matrices.conj(), cb.matrices)
    fro = np.sum(np.abs(cross) ** 2, axis=(2, 3))
    np.fill_diagonal(fro, -np.inf)
    return float(np.sqrt(max(0.0, cb.n_streams - fro.max())))


def beam_metrics(h, cb: BeamCodebook):
    """Receive beamforming gains ||H v_l||^2 for every codeword."""
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[1] != cb.n_tx:
        raise ValueError(f"channel must be (n_rx, {cb.n_tx})")
    eff = h @ cb.vectors.T  # (n_rx, N)
    return np.sum(np.abs(eff) ** 2, axis=0)


def quantize_beam(h, cb: BeamCodebook) -> int:
    """Feedback index (1-based) maximizing ||H v_l||^2; ties take the lowest."""
    return int(np.argmax(beam_metrics(h, cb))) + 1


def quantize_beam_trace(samples, cb: BeamCodebook):
    """Vectorized beam quantization over a whole trace.

    Returns (indices, metrics): 1-based selected indices and the winning
    gain ||H v||^2 per sample.
    """
    samples = np.asarray(samples)
    if samples.ndim != 3 or samples.shape[2] != cb.n_tx:
        raise ValueError("samples must be (length, n_rx, n_tx)")
    n = samples.shape[0]
    best = np.full(n, -np.inf)
    idx = np.zeros(n, dtype=np.int32)
    for l in range(cb.size):
        eff = samples @ cb.vectors[l]
        metric = np.sum(np.abs(eff) ** 2, axis=1)
        better = metric > best
        best[better] = metric[better]
        idx[better] = l + 1
    return idx, best


def precoder_metrics(h, cb: PrecoderCodebook):
    """Mutual-information metric per codeword, in bits.

    With the power-split precoder F_l = M_l/sqrt(Ns) the metric is
    log2 det(I_Ns + (1/Ns) (H F_l)* (H F_l)).
    """
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[1] != cb.n_tx:
        raise ValueError(f"channel must be (n_rx, {cb.n_tx})")
    ns = cb.n_streams
    scaled = cb.matrices / np.sqrt(ns)
    eff = np.einsum("ij,njk->nik", h, scaled)  # (N, n_rx, ns)
    gram = np.einsum("nij,nik->njk", eff.conj(), eff)
    sign, logdet = np.linalg.slogdet(np.eye(ns) + gram / ns)
    if np.any(sign.real <= 0):
        raise ValueError("metric determinant not positive; invalid codebook or channel")
    return logdet / np.log(2.0)


def quantize_precoder(h, cb: PrecoderCodebook) -> int:
    """Feedback index (1-based) maximizing the mutual-information metric."""
    return int(np.argmax(precoder_metrics(h, cb))) + 1


def quantize_precoder_trace(samples, cb: PrecoderCodebook):
    """Vectorized precoder quantization over a whole trace (1-based indices)."""
    samples = np.asarray(samples)
    if samples.ndim != 3 or samples.shape[2] != cb.n_tx:
        raise ValueError("samples must be (length, n_rx, n_tx)")
    n = samples.shape[0]
    ns = cb.n_streams
    best = np.full(n, -np.inf)
    idx = np.zeros(n, dtype=np.int32)
    eye = np.eye(ns)
    for l in range(cb.size):
        eff = samples @ (cb.matrices[l] / np.sqrt(ns))
        gram = np.einsum("nij,nik->njk", eff.conj(), eff)
        _, logdet = np.linalg.slogdet(eye + gram / ns)
        better = logdet > best
        best[better] = logdet[better]
        idx[better] = l + 1
    return idx, best / np.log(2.0)
