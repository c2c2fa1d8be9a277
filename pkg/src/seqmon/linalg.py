"""Symmetric eigendecomposition helpers: pseudoinverse and PSD square root."""

import numpy as np

PINV_RTOL = 1e-10


def sym_pinv(M, rtol=PINV_RTOL):
    """Moore-Penrose pseudoinverse of a symmetric matrix.

    Eigenvalues at or below ``rtol * max(lambda_max, 1e-300)`` are treated as
    zero.

    Returns:
        (pinv, rank)
    """
    M = np.asarray(M, dtype=float)
    evals, evecs = np.linalg.eigh(M)
    cutoff = rtol * max(float(evals[-1]) if evals.size else 0.0, 1e-300)
    keep = evals > cutoff
    inv = np.zeros_like(evals)
    inv[keep] = 1.0 / evals[keep]
    return (evecs * inv) @ evecs.T, int(keep.sum())


def psd_sqrt(M, sym_rtol=1e-8, neg_rtol=1e-10):
    """Symmetric square root of a symmetric positive semidefinite matrix.

    Small negative eigenvalues (round-off) are clipped to zero.

    Raises:
        ValueError: if ``M`` is asymmetric beyond ``sym_rtol`` (relative
            Frobenius) or has an eigenvalue below ``-neg_rtol * ||M||_2``.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    scale = np.linalg.norm(M)
    if scale == 0.0:
        return np.zeros_like(M)
    if np.linalg.norm(M - M.T) > sym_rtol * scale:
        raise ValueError("matrix is not symmetric")
    evals, evecs = np.linalg.eigh(0.5 * (M + M.T))
    spectral = float(np.max(np.abs(evals)))
    if evals[0] < -neg_rtol * spectral:
        raise ValueError(f"matrix is indefinite (min eigenvalue {evals[0]:.3e})")
    root = np.sqrt(np.clip(evals, 0.0, None))
    R = (evecs * root) @ evecs.T
    return 0.5 * (R + R.T)
