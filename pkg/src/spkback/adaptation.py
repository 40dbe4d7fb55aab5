"""Unsupervised covariance alignment: CORAL on embeddings or models, and CORAL+."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DataError, EmbeddingSet
from .numlin import DEFAULT_FLOOR, floor_eigenvalues, sample_mean_cov, simultaneous_diagonalize, sym_sqrt, symmetrize
from .plda import PldaModel


@dataclass(frozen=True)
class AdaptConfig:
    alpha_b: float = 0.5
    alpha_w: float = 0.5
    floor: float = DEFAULT_FLOOR

    def __post_init__(self):
        for name in ("alpha_b", "alpha_w"):
            a = getattr(self, name)
            if not 0.0 <= a <= 1.0:
                raise DataError(f"{name} must be in [0, 1], got {a}")


def coral_transform(C_out, C_in, floor: float = DEFAULT_FLOOR) -> np.ndarray:
    """Whiten with the out-of-domain covariance, recolour with the in-domain one."""
    C_out = floor_eigenvalues(C_out, floor)
    C_in = floor_eigenvalues(C_in, floor)
    return sym_sqrt(C_in, floor=floor) @ sym_sqrt(C_out, inverse=True, floor=floor)


def coral_adapt_embeddings(out_domain: EmbeddingSet, in_domain: EmbeddingSet,
                           floor: float = DEFAULT_FLOOR) -> EmbeddingSet:
    """Map out-of-domain embeddings so their mean and covariance match the in-domain set."""
    if out_domain.dim != in_domain.dim:
        raise DataError(f"dimension mismatch: {out_domain.dim} vs {in_domain.dim}")
    if len(out_domain) < 2 or len(in_domain) < 2:
        raise DataError("CORAL needs at least two embeddings per domain")
    mu_out, C_out = sample_mean_cov(out_domain.X)
    mu_in, C_in = sample_mean_cov(in_domain.X)
    A = coral_transform(C_out, C_in, floor)
    X = (out_domain.X - mu_out) @ A.T + mu_in
    return out_domain.with_vectors(X, domain=in_domain.domain)


def coral_plus_covariance(phi, phi_pseudo, alpha: float, floor: float = DEFAULT_FLOOR) -> np.ndarray:
    """Interpolate towards a pseudo in-domain covariance without ever shrinking variance.

    With B.T phi B = I and B.T phi_pseudo B = diag(lam)::

        phi+ = phi + alpha * inv(B).T @ diag(max(lam, 1) - 1) @ inv(B)
    """
    if not 0.0 <= alpha <= 1.0:
        raise DataError(f"alpha must be in [0, 1], got {alpha}")
    _, lam, Binv_T = simultaneous_diagonalize(phi, phi_pseudo, floor)
    gain = np.maximum(lam, 1.0) - 1.0
    return symmetrize(np.asarray(phi, dtype=np.float64) + alpha * (Binv_T * gain) @ Binv_T.T)


def _pseudo_covariances(model: PldaModel, in_domain: EmbeddingSet, floor):
    if in_domain.dim != model.dim:
        raise DataError(f"dimension mismatch: model {model.dim}, in-domain {in_domain.dim}")
    if len(in_domain) < 2:
        raise DataError("need at least two in-domain embeddings")
    phi_b, phi_w = model.covariances()
    mu_in, C_in = sample_mean_cov(in_domain.X)
    T = coral_transform(phi_b + phi_w, C_in, floor)
    return phi_b, phi_w, symmetrize(T @ phi_b @ T.T), symmetrize(T @ phi_w @ T.T), mu_in


def coral_adapt_model(model: PldaModel, in_domain: EmbeddingSet, floor: float = DEFAULT_FLOOR) -> PldaModel:
    """Model-level CORAL: replace both covariances by their recoloured versions."""
    _, _, pb, pw, mu_in = _pseudo_covariances(model, in_domain, floor)
    return PldaModel.from_covariances(mu_in, pb, pw, floor)


def coral_plus_adapt_model(model: PldaModel, in_domain: EmbeddingSet, cfg: AdaptConfig = AdaptConfig()) -> PldaModel:
    phi_b, phi_w, pb, pw, mu_in = _pseudo_covariances(model, in_domain, cfg.floor)
    new_b = coral_plus_covariance(phi_b, pb, cfg.alpha_b, cfg.floor)
    new_w = coral_plus_covariance(phi_w, pw, cfg.alpha_w, cfg.floor)
    return PldaModel.from_covariances(mu_in, new_b, new_w, cfg.floor)
