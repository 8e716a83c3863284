import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # expose tests/oracles.py

from lfsim.codebook import BeamCodebook, PrecoderCodebook


@pytest.fixture
def rng():
    return np.random.default_rng(20240802)


@pytest.fixture
def basis_beam_2():
    """The {e1, e2} beam codebook for 2 transmit antennas."""
    return BeamCodebook(n_tx=2, vectors=np.eye(2, dtype=complex))


@pytest.fixture
def basis_precoder_4():
    """{[e1 e2], [e3 e4]} precoder codebook for 4 antennas, 2 streams."""
    eye = np.eye(4, dtype=complex)
    mats = np.stack([eye[:, 0:2], eye[:, 2:4]])
    return PrecoderCodebook(n_tx=4, n_streams=2, matrices=mats)


def write_codebook_file(path, n, n_tx, n_streams, blocks):
    """Write a codebook file from an iterable of (n_tx, n_streams) blocks."""
    lines = [f"{n} {n_tx} {n_streams}"]
    for block in blocks:
        arr = np.asarray(block, dtype=complex).reshape(n_tx, n_streams)
        for row in arr:
            lines.append(" ".join(f"{float(v.real)!r} {float(v.imag)!r}" for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)
