"""Shared numeric kernels: Bessel J0, symmetric eigenvalues, Hermitian log-det.

Thin validated wrappers around SciPy/NumPy.  All logarithms are base 2
because every rate in this package is expressed in bits per channel use.
"""

from __future__ import annotations

import numpy as np
from scipy import special

LN2 = float(np.log(2.0))


def bessel_j0(x):
    """Bessel function of the first kind, order zero.

    Accepts a scalar or an array; non-finite input is rejected.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("bessel_j0: input must be finite")
    out = special.j0(arr)
    return float(out) if arr.ndim == 0 else out


def eig_symmetric(m, sym_tol=1e-12):
    """Eigenvalues of a real symmetric matrix, sorted in descending order.

    The matrix must be symmetric within ``sym_tol`` (scaled by its largest
    magnitude entry); anything worse is rejected rather than silently
    symmetrized.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("eig_symmetric: matrix must be square")
    scale = max(1.0, float(np.abs(m).max()))
    if float(np.abs(m - m.T).max()) > sym_tol * scale:
        raise ValueError("eig_symmetric: matrix is not symmetric within tolerance")
    vals = np.linalg.eigvalsh(0.5 * (m + m.T))
    return vals[::-1].copy()


def logdet_i_plus_hermitian(a, herm_tol=1e-10):
    """log2 det(I + A) in bits, for Hermitian positive semidefinite A.

    Evaluated through a Cholesky factorization of I + A, which is
    numerically stable for the covariance-style matrices this package
    produces.  A must be Hermitian within ``herm_tol`` and PSD within the
    same slack (checked with a shifted Cholesky probe); indefinite input
    is rejected.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("logdet_i_plus_hermitian: matrix must be square")
    scale = max(1.0, float(np.abs(a).max()))
    if float(np.abs(a - a.conj().T).max()) > herm_tol * scale:
        raise ValueError("logdet_i_plus_hermitian: matrix is not Hermitian")
    ah = 0.5 * (a + a.conj().T)
    n = ah.shape[0]
    eye = np.eye(n)
    try:
        np.linalg.cholesky(ah + herm_tol * scale * eye)
    except np.linalg.LinAlgError:
        raise ValueError("logdet_i_plus_hermitian: matrix is not positive semidefinite")
    chol = np.linalg.cholesky(eye + ah)
    return float(2.0 * np.sum(np.log2(np.real(np.diag(chol)))))
