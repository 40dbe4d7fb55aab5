"""Dense symmetric linear algebra used by PLDA, LDA and CORAL.

All decompositions are thin wrappers over LAPACK (via numpy) with two extras
the back-ends rely on: relative eigenvalue flooring for matrices that must be
positive definite, and a deterministic ordering/sign convention for
eigenvectors so that trained models are reproducible.
"""
from __future__ import annotations

import numpy as np

from .core import DataError, NumericError

DEFAULT_FLOOR = 1e-10


def symmetrize(S) -> np.ndarray:
    S = np.asarray(S, dtype=np.float64)
    return 0.5 * (S + S.T)


def _check_square(S, name="matrix"):
    S = np.atleast_2d(np.asarray(S, dtype=np.float64))
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DataError(f"{name} must be square, got shape {S.shape}")
    if not np.all(np.isfinite(S)):
        raise NumericError(f"{name} has non-finite entries")
    return S


def sample_mean_cov(X) -> tuple[np.ndarray, np.ndarray]:
    """Mean and maximum-likelihood covariance (divisor N) of the rows of X."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] == 0:
        raise DataError("sample_mean_cov needs at least one row")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = symmetrize(Xc.T @ Xc / X.shape[0])
    return mean, cov


def _fix_signs(V):
    # largest-magnitude entry of each column made positive
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def sym_eig(S) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix, eigenvalues sorted descending.

    Returns ``(V, lam)`` with ``S @ V == V @ diag(lam)``.
    """
    S = symmetrize(_check_square(S))
    lam, V = np.linalg.eigh(S)
    order = np.argsort(-lam, kind="stable")
    return _fix_signs(V[:, order]), lam[order]


def floor_eigenvalues(S, floor: float = DEFAULT_FLOOR, reference: float | None = None) -> np.ndarray:
    """Raise eigenvalues below ``floor * ref`` up to that value.

    ``ref`` is the largest eigenvalue of S unless ``reference`` is given. The
    matrix is returned untouched when no eigenvalue needs flooring.
    """
    S = symmetrize(_check_square(S))
    V, lam = sym_eig(S)
    ref = lam[0] if reference is None else reference
    level = floor * ref
    if not level > 0:
        raise NumericError("matrix has no positive eigenvalue to floor against")
    if lam[-1] >= level:
        return S
    lam = np.maximum(lam, level)
    return symmetrize((V * lam) @ V.T)


def cholesky(S, floor: float | None = DEFAULT_FLOOR) -> np.ndarray:
    """Lower-triangular L with L @ L.T == S (after optional flooring)."""
    S = symmetrize(_check_square(S))
    if floor is not None:
        S = floor_eigenvalues(S, floor)
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"matrix is not positive definite: {exc}") from None


def sym_sqrt(S, inverse: bool = False, floor: float = DEFAULT_FLOOR) -> np.ndarray:
    """Symmetric square root of a PSD matrix, or of its inverse."""
    S = symmetrize(_check_square(S))
    V, lam = sym_eig(S)
    lmax = max(lam[0], 0.0)
    level = floor * lmax
    if lam[-1] < -level:
        raise NumericError(f"negative eigenvalue {lam[-1]:.3g} below floor")
    if inverse:
        if not lmax > 0:
            raise NumericError("cannot invert a zero matrix")
        lam = np.maximum(lam, level)
        d = 1.0 / np.sqrt(lam)
    else:
        d = np.sqrt(np.maximum(lam, 0.0))
    return symmetrize((V * d) @ V.T)


def simultaneous_diagonalize(phi_w, phi_b, floor: float = DEFAULT_FLOOR):
    """Find U with U.T @ phi_w @ U = I and U.T @ phi_b @ U = diag(psi).

    Whitens by the Cholesky factor of ``phi_w`` and eigendecomposes the
    whitened ``phi_b``. ``psi`` is sorted descending and clipped at zero.

    Returns ``(U, psi, A)`` where ``A = inv(U).T``.
    """
    phi_w = symmetrize(_check_square(phi_w, "phi_w"))
    phi_b = symmetrize(_check_square(phi_b, "phi_b"))
    if phi_w.shape != phi_b.shape:
        raise DataError(f"shape mismatch {phi_w.shape} vs {phi_b.shape}")
    L = cholesky(phi_w, floor)
    W = np.linalg.solve(L, np.eye(L.shape[0]))  # L^-1
    M = symmetrize(W @ phi_b @ W.T)
    V, psi = sym_eig(M)
    U = W.T @ V
    A = L @ V
    return U, np.maximum(psi, 0.0), A
