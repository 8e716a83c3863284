"""Feedback-state Markov chain estimation and convergence machinery.

The feedback index sequence produced by quantizing a correlated channel
trace is modeled as a first-order chain over the states 1..N.  The decay
analysis rests on the second-largest eigenvalue of the multiplicative
reversibilization P*P~ (P~ the time reversal), obtained here through a
symmetric similar form so a real-symmetric eigensolver suffices, and on
the total-variation convergence inequality

    (sum_m |[P^d]_{lm} - pi_m|)^2 <= lambda^d / pi_l

which the validation suite checks at runtime instead of assuming.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import eig_symmetric

ROW_SUM_TOL = 1e-9


@dataclass(frozen=True)
class StochasticMatrix:
    """A row-stochastic N x N transition matrix."""

    entries: np.ndarray

    def __post_init__(self):
        ent = self.entries
        if ent.ndim != 2 or ent.shape[0] != ent.shape[1]:
            raise ValueError("transition matrix must be square")
        if np.any(ent < 0):
            raise ValueError("transition probabilities must be >= 0")
        if np.max(np.abs(ent.sum(axis=1) - 1.0)) > ROW_SUM_TOL:
            raise ValueError("rows must sum to 1")
        ent.flags.writeable = False

    @property
    def n_states(self):
        return self.entries.shape[0]


def estimate_transition_matrix(indices, n_states) -> StochasticMatrix:
    """Row-normalized transition counts of a 1-based state sequence.

    States never visited as a source get a uniform row, which keeps the
    matrix stochastic and the ergodicity check meaningful.
    """
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1 or idx.size < 2:
        raise ValueError("need a sequence of at least 2 states")
    if np.any(idx < 1) or np.any(idx > n_states):
        raise ValueError(f"states must lie in 1..{n_states}")
    counts = np.zeros((n_states, n_states))
    np.add.at(counts, (idx[:-1] - 1, idx[1:] - 1), 1.0)
    totals = counts.sum(axis=1)
    unvisited = totals == 0
    counts[unvisited] = 1.0 / n_states
    totals[unvisited] = 1.0
    return StochasticMatrix(counts / totals[:, None])


def _is_irreducible(p: StochasticMatrix) -> bool:
    """Every state reachable from every state: (I + B)^(N-1) strictly positive."""
    n = p.n_states
    reach = (p.entries > 0) | np.eye(n, dtype=bool)
    power = np.eye(n, dtype=bool)
    base = reach
    k = n - 1
    while k:
        if k & 1:
            power = (power.astype(np.uint8) @ base.astype(np.uint8)) > 0
        base = (base.astype(np.uint8) @ base.astype(np.uint8)) > 0
        k >>= 1
    return bool(power.all())


def _damped_fixed_point(entries, tol=1e-13, max_iter=200_000):
    """Fixed point of pi <- (pi + pi P)/2 from a uniform start.

    The damping removes any period-2 oscillation, so this converges for
    every stochastic matrix; for ergodic P the limit is the stationary
    distribution.
    """
    n = entries.shape[0]
    pi = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        nxt = 0.5 * (pi + pi @ entries)
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - pi)) <= tol:
            return nxt
        pi = nxt
    raise RuntimeError("stationary distribution iteration did not converge")


def stationary_distribution(p: StochasticMatrix) -> np.ndarray:
    """Stationary distribution of an ergodic (irreducible) chain.

    Reducible chains have no unique stationary distribution and are
    rejected.  The result satisfies ||pi P - pi||_inf <= 1e-9; the damped
    power iteration also handles periodic irreducible chains.
    """
    if not _is_irreducible(p):
        raise ValueError("chain is not ergodic: some state is unreachable")
    pi = _damped_fixed_point(p.entries)
    residual = np.max(np.abs(pi @ p.entries - pi))
    if residual > 1e-9:
        raise RuntimeError(f"stationary distribution residual {residual:.2e} > 1e-9")
    return pi


def matrix_power(p: StochasticMatrix, d: int) -> StochasticMatrix:
    """P^d via repeated squaring; d = 0 gives the identity."""
    if d < 0:
        raise ValueError("power must be >= 0")
    out = np.linalg.matrix_power(p.entries, d)
    out = np.clip(out, 0.0, None)
    return StochasticMatrix(out / out.sum(axis=1)[:, None])


def reversibilization(p: StochasticMatrix, pi) -> np.ndarray:
    """Symmetric matrix sharing the spectrum of P*P~ (P~ the time reversal).

    With D = diag(pi) and A = D^{1/2} P D^{-1/2}, the returned matrix is
    A A^T = D^{1/2} (P P~) D^{-1/2}, which is similar to P P~ and reduces
    to P P^T when pi is uniform.  pi must be stationary for P within 1e-6.
    """
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (p.n_states,):
        raise ValueError("pi has the wrong length")
    if np.any(pi <= 0):
        raise ValueError("pi must be strictly positive")
    if abs(pi.sum() - 1.0) > 1e-9:
        raise ValueError("pi must sum to 1")
    if np.max(np.abs(pi @ p.entries - pi)) > 1e-6:
        raise ValueError("pi is not stationary for P within 1e-6")
    sqrt_pi = np.sqrt(pi)
    a = (sqrt_pi[:, None] * p.entries) / sqrt_pi[None, :]
    m = a @ a.T
    return 0.5 * (m + m.T)


def second_eigenvalue(m) -> float:
    """Second-largest eigenvalue of a reversibilization matrix, in [0, 1].

    The top eigenvalue must equal 1 within 1e-6 (otherwise the P/pi pair
    that produced M was inconsistent); values straying from [0, 1] by at
    most 1e-9 are clamped.
    """
    vals = eig_symmetric(m)
    if abs(vals[0] - 1.0) > 1e-6:
        raise ValueError(f"top eigenvalue {vals[0]} != 1; inconsistent chain")
    lam = float(vals[1]) if vals.size > 1 else 0.0
    if lam < -1e-9 or lam > 1.0 + 1e-9:
        raise ValueError(f"second eigenvalue {lam} outside [0, 1]")
    return min(max(lam, 0.0), 1.0)


def convergence_deviation(p: StochasticMatrix, d: int, state: int, pi=None) -> float:
    """Total deviation sum_m |[P^d]_{state,m} - pi_m| for a 1-based state.

    When ``pi`` is omitted it is taken as the fixed point of the damped
    power iteration started from uniform, which exists for every
    stochastic matrix (for non-ergodic chains, e.g. the identity, this
    yields the uniform distribution and the deviation is still well
    defined).
    """
    if not 1 <= state <= p.n_states:
        raise ValueError(f"state must lie in 1..{p.n_states}")
    if pi is None:
        pi = _damped_fixed_point(p.entries)
    else:
        pi = np.asarray(pi, dtype=float)
    row = matrix_power(p, d).entries[state - 1]
    return float(np.sum(np.abs(row - pi)))


def convergence_margin(p: StochasticMatrix, pi, lam, d_max=50):
    """Worst signed violation of the convergence inequality over a delay range.

    Returns max over d in 1..d_max and all states l of
    dev(d, l)^2 - lam^d / pi_l, which must stay <= 0 (up to roundoff) for a
    consistent (P, pi, lam) triple.
    """
    pi = np.asarray(pi, dtype=float)
    worst = -np.inf
    power = p.entries.copy()
    for d in range(1, d_max + 1):
        dev = np.sum(np.abs(power - pi[None, :]), axis=1)
        worst = max(worst, float(np.max(dev**2 - lam**d / pi)))
        power = power @ p.entries
    return worst


def write_matrix_csv(p: StochasticMatrix, path) -> None:
    """Serialize as CSV: a `# n_states=N` header then N rows of N entries."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# n_states={p.n_states}\n")
        for row in p.entries:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_matrix_csv(path) -> StochasticMatrix:
    """Load a matrix written by :func:`write_matrix_csv`."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("# n_states="):
            raise ValueError("missing '# n_states=N' header")
        n = int(header.split("=", 1)[1])
        rows = [
            [float(tok) for tok in line.strip().split(",")]
            for line in fh
            if line.strip()
        ]
    entries = np.asarray(rows)
    if entries.shape != (n, n):
        raise ValueError(f"matrix body {entries.shape} does not match header n={n}")
    return StochasticMatrix(entries)
