#!/usr/bin/env python3
"""Regenerate the codebook data files shipped under src/lfsim/data/codebooks/.

Two constructions are used (see README for provenance):

* 2-TX beam codebooks: equal-gain phase-rotation vectors
  v_k = [1, exp(j*2*pi*k/N)] / sqrt(2).  For N = 4 this coincides with the
  standard 2-antenna LTE set {[1,1],[1,-1],[1,j],[1,-j]}/sqrt(2).
* 4-TX codebooks: Householder reflections W_n = I - 2 u_n u_n*/||u_n||^2
  built from the 16-entry generator table of the 3GPP LTE 4-antenna
  codebook (TS 36.211).  Rank-1 codewords are the first column of each
  W_n.  The rank-2 variant picks one column pair per reflection with a
  deterministic greedy max-min chordal-distance rule (taking a fixed pair
  everywhere would duplicate subspaces); no bit-equality with any
  particular published file is claimed.

Run from the repository root:  python3 tools/gen_codebooks.py
"""

import pathlib

import numpy as np

OUT_DIR = pathlib.Path(__file__).resolve().parent.parent / "src" / "lfsim" / "data" / "codebooks"

S2 = 1.0 / np.sqrt(2.0)
LTE_U = np.array(
    [
        [1, -1, -1, -1],
        [1, -1j, 1, 1j],
        [1, 1, -1, 1],
        [1, 1j, 1, -1j],
        [1, (-1 - 1j) * S2, -1j, (1 - 1j) * S2],
        [1, (1 - 1j) * S2, 1j, (-1 - 1j) * S2],
        [1, (1 + 1j) * S2, -1j, (-1 + 1j) * S2],
        [1, (-1 + 1j) * S2, 1j, (1 + 1j) * S2],
        [1, -1, 1, 1],
        [1, -1j, -1, -1j],
        [1, 1, 1, -1],
        [1, 1j, -1, 1j],
        [1, -1, -1, 1],
        [1, -1, 1, -1],
        [1, 1, -1, -1],
        [1, 1, 1, 1],
    ],
    dtype=complex,
)


def householder_matrices():
    mats = []
    for u in LTE_U:
        u = u.reshape(-1, 1)
        mats.append(np.eye(4) - 2.0 * (u @ u.conj().T) / np.real(u.conj().T @ u))
    return mats


def subspace_distance(f, g):
    cross = f.conj().T @ g
    return np.sqrt(max(0.0, f.shape[1] - float(np.sum(np.abs(cross) ** 2))))


def rank2_blocks(mats):
    """One column pair per reflection, greedily maximizing pairwise distance."""
    from itertools import combinations

    pairs = list(combinations(range(4), 2))
    chosen = []
    for w in mats:
        best_block, best_score = None, -1.0
        for pair in pairs:
            block = w[:, list(pair)]
            score = min((subspace_distance(block, c) for c in chosen), default=np.inf)
            if score > best_score + 1e-12:
                best_score, best_block = score, block
        chosen.append(best_block)
    return chosen


def phase_rotation_vectors(n_codes):
    phases = np.exp(2j * np.pi * np.arange(n_codes) / n_codes)
    vecs = np.stack([np.ones(n_codes), phases], axis=1) / np.sqrt(2.0)
    return vecs


def write_codebook(path, blocks, n_tx, n_streams, comment):
    lines = [f"# {comment}", f"{len(blocks)} {n_tx} {n_streams}"]
    for block in blocks:
        block = np.asarray(block).reshape(n_tx, n_streams)
        for row in block:
            lines.append(" ".join(f"{v.real:.17g} {v.imag:.17g}" for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {path}")


def main():
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    for n in (4, 8, 16):
        vecs = phase_rotation_vectors(n)
        write_codebook(
            OUT_DIR / f"beam_nt2_n{n}.cb",
            [v.reshape(2, 1) for v in vecs],
            n_tx=2,
            n_streams=1,
            comment=f"2-TX equal-gain phase-rotation beam codebook, N={n}",
        )
    mats = householder_matrices()
    write_codebook(
        OUT_DIR / "householder_nt4_n16_rank1.cb",
        [m[:, :1] for m in mats],
        n_tx=4,
        n_streams=1,
        comment="4-TX Householder beam codebook (LTE generator table), N=16, rank 1",
    )
    write_codebook(
        OUT_DIR / "householder_nt4_n16_rank2.cb",
        rank2_blocks(mats),
        n_tx=4,
        n_streams=2,
        comment="4-TX Householder precoder codebook (LTE generator table), N=16, rank 2 (greedy column pairs)",
    )


if __name__ == "__main__":
    main()
