"""Two-covariance PLDA: EM training, preprocessing and closed-form LLR scoring.

Model::

    y ~ N(m, Phi_b),   x | y ~ N(y, Phi_w)

After simultaneous diagonalization (U.T Phi_w U = I, U.T Phi_b U = diag(psi))
an embedding is mapped to ``u = U.T (x - m)`` and the verification LLR
becomes a sum of independent per-dimension terms.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import multivariate_normal

from .core import DataError, EmbeddingSet, NumericError
from .numlin import DEFAULT_FLOOR, floor_eigenvalues, simultaneous_diagonalize, symmetrize

logger = logging.getLogger(__name__)

LOG_2PI = np.log(2.0 * np.pi)


def scoring_constants(psi) -> tuple[np.ndarray, np.ndarray]:
    """Per-dimension constants ``(c, m)`` of the closed-form LLR."""
    psi = np.asarray(psi, dtype=np.float64)
    c = -np.log(2.0 * psi + 1.0) + 2.0 * np.log1p(psi)
    m = psi / ((2.0 * psi + 1.0) * (psi + 1.0))
    return c, m


@dataclass(frozen=True, eq=False)
class PldaModel:
    mean: np.ndarray
    A_inv: np.ndarray
    psi: np.ndarray
    const_c: np.ndarray = field(init=False, repr=False)
    const_m: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        mean = np.array(self.mean, dtype=np.float64).reshape(-1)
        A_inv = np.array(self.A_inv, dtype=np.float64, order="C")
        psi = np.array(self.psi, dtype=np.float64).reshape(-1)
        d = mean.size
        if A_inv.shape != (d, d) or psi.size != d:
            raise DataError(f"inconsistent model shapes: mean {mean.shape}, A_inv {A_inv.shape}, psi {psi.shape}")
        if np.any(psi < 0) or not np.all(np.isfinite(psi)):
            raise DataError("psi must be finite and non-negative")
        c, m = scoring_constants(psi)
        for name, arr in (("mean", mean), ("A_inv", A_inv), ("psi", psi), ("const_c", c), ("const_m", m)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dim(self) -> int:
        return self.mean.size

    @property
    def A(self) -> np.ndarray:
        return np.linalg.inv(self.A_inv)

    def covariances(self) -> tuple[np.ndarray, np.ndarray]:
        """Reconstruct ``(Phi_b, Phi_w)`` as ``A diag(psi) A.T`` and ``A A.T``."""
        A = self.A
        with np.errstate(over="ignore", invalid="ignore"):
            phi_b, phi_w = symmetrize((A * self.psi) @ A.T), symmetrize(A @ A.T)
        if not (np.all(np.isfinite(phi_b)) and np.all(np.isfinite(phi_w))):
            raise NumericError("model covariances overflow")
        return phi_b, phi_w

    @classmethod
    def from_covariances(cls, mean, phi_b, phi_w, floor: float = DEFAULT_FLOOR) -> "PldaModel":
        U, psi, _ = simultaneous_diagonalize(phi_w, phi_b, floor)
        return cls(mean, U.T, psi)


@dataclass(frozen=True)
class PldaFitConfig:
    em_iters: int = 20
    tol: float = 1e-6
    floor: float = DEFAULT_FLOOR

    def __post_init__(self):
        if int(self.em_iters) < 1:
            raise DataError("em_iters must be >= 1")
        if not self.tol > 0:
            raise DataError("tol must be > 0")


def _speaker_stats(eset: EmbeddingSet, mean):
    k = eset.spk_index
    S = eset.n_speakers
    counts = np.bincount(k, minlength=S).astype(np.float64)
    sums = np.zeros((S, eset.dim))
    np.add.at(sums, k, eset.X - mean)
    return counts, sums


def _loglik(Xc, k, counts, sums_u, U, psi):
    """Average per-utterance log-likelihood of the training data."""
    N, D = Xc.shape
    u = Xc @ U
    sq = np.zeros(len(counts))
    np.add.at(sq, k, (u * u).sum(axis=1))
    n = counts[:, None]
    denom = 1.0 + n * psi
    quad = sq - (psi * sums_u ** 2 / denom).sum(axis=1)
    logdet = np.log(denom).sum(axis=1)
    ll = -0.5 * (N * D * LOG_2PI + logdet.sum() + quad.sum())
    _, logabs = np.linalg.slogdet(U)
    return (ll + N * logabs) / N


def train_two_covariance(eset: EmbeddingSet, cfg: PldaFitConfig = PldaFitConfig()):
    """EM for the two-covariance model with the mean fixed at the data mean.

    Returns ``(mean, phi_b, phi_w, history)`` where ``history`` holds the
    average log-likelihood evaluated before each M-step and once at the end.
    """
    eset.require_labels("PLDA training")
    if eset.n_speakers < 2:
        raise DataError(f"PLDA training needs >= 2 speakers, got {eset.n_speakers}")
    X = eset.X
    N, D = X.shape
    k = eset.spk_index
    mean = X.mean(axis=0)
    Xc = X - mean
    counts, sums = _speaker_stats(eset, mean)
    spk_means = sums / counts[:, None]
    scatter = Xc.T @ Xc

    # moment initialisation
    dev = Xc - spk_means[k]
    phi_w = symmetrize(dev.T @ dev / N)
    phi_b = symmetrize((spk_means * counts[:, None]).T @ spk_means / N)
    total = symmetrize(scatter / N)
    ref = np.linalg.eigvalsh(total)[-1]
    phi_w = floor_eigenvalues(phi_w, cfg.floor, reference=ref)

    history = []
    for it in range(int(cfg.em_iters)):
        U, psi, A = simultaneous_diagonalize(phi_w, phi_b, cfg.floor)
        sums_u = sums @ U
        ll = _loglik(Xc, k, counts, sums_u, U, psi)
        history.append(ll)
        if it > 0:
            rel = (ll - history[-2]) / max(abs(history[-2]), 1e-300)
            logger.debug("EM iter %d: avg loglik %.10f (rel %.3g)", it, ll, rel)
            if rel < cfg.tol:
                break
        # E-step in the diagonal frame: posterior of v_s per dimension
        n = counts[:, None]
        post_var = psi / (1.0 + n * psi)
        post_mean = post_var * sums_u
        # M-step, expressed in the u frame then mapped back with A
        Eb = (post_mean.T @ post_mean + np.diag(post_var.sum(axis=0))) / len(counts)
        sc_u = U.T @ scatter @ U
        cross = sums_u.T @ post_mean
        Ew = (sc_u - cross - cross.T + (post_mean * n).T @ post_mean
              + np.diag((post_var * n).sum(axis=0))) / N
        phi_b = symmetrize(A @ Eb @ A.T)
        phi_w = floor_eigenvalues(symmetrize(A @ Ew @ A.T), cfg.floor, reference=ref)
    else:
        U, psi, A = simultaneous_diagonalize(phi_w, phi_b, cfg.floor)
        history.append(_loglik(Xc, k, counts, sums @ U, U, psi))
    return mean, phi_b, phi_w, history


def fit_plda(eset: EmbeddingSet, cfg: PldaFitConfig = PldaFitConfig()) -> PldaModel:
    mean, phi_b, phi_w, history = train_two_covariance(eset, cfg)
    logger.info("PLDA trained: %d EM evaluations, final avg loglik %.6f", len(history), history[-1])
    return PldaModel.from_covariances(mean, phi_b, phi_w, cfg.floor)


def preprocess(model: PldaModel, x) -> np.ndarray:
    """Map embeddings (a vector or rows of a matrix) to ``u = A^-1 (x - m)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.dim:
        raise DataError(f"dimension mismatch: model {model.dim}, input {x.shape[-1]}")
    return (x - model.mean) @ model.A_inv.T


def llr_score(model: PldaModel, u1, u2) -> float:
    u1 = np.asarray(u1, dtype=np.float64)
    u2 = np.asarray(u2, dtype=np.float64)
    if u1.shape != (model.dim,) or u2.shape != (model.dim,):
        raise DataError("dimension mismatch")
    terms = model.const_c + model.const_m * (2.0 * u1 * u2 - model.psi * (u1 - u2) ** 2)
    return 0.5 * float(terms.sum())


def llr_score_oracle(model: PldaModel, u1, u2) -> float:
    """Exact LLR from the joint Gaussian of the two embeddings.

    Same speaker: ``[u1; u2] ~ N(0, [[Psi+I, Psi], [Psi, Psi+I]])``;
    different speakers: independent ``N(0, Psi+I)`` marginals.
    """
    u1 = np.asarray(u1, dtype=np.float64)
    u2 = np.asarray(u2, dtype=np.float64)
    if u1.shape != (model.dim,) or u2.shape != (model.dim,):
        raise DataError("dimension mismatch")
    P = np.diag(model.psi)
    marg = P + np.eye(model.dim)
    joint = np.block([[marg, P], [P, marg]])
    zero = np.zeros(model.dim)
    same = multivariate_normal(np.zeros(2 * model.dim), joint).logpdf(np.concatenate([u1, u2]))
    diff = multivariate_normal(zero, marg).logpdf(u1) + multivariate_normal(zero, marg).logpdf(u2)
    return float(same - diff)


def expected_llr_term(psi_i: float, hypothesis: str) -> float:
    """Expectation of ``m_i (2 u1 u2 - psi_i (u1 - u2)^2)`` under H1 or H0."""
    if psi_i < 0:
        raise DataError("psi must be non-negative")
    h = hypothesis.upper()
    if h == "H1":
        return 0.0
    if h == "H0":
        return -2.0 * psi_i ** 2 / (2.0 * psi_i + 1.0)
    raise DataError(f"hypothesis must be H1 or H0, got {hypothesis!r}")
