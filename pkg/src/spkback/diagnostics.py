"""Embedding-distribution diagnostics and back-end recommendation.

Three views of a set of embeddings:

* cosine-distance histograms of same-speaker vs cross-speaker pairs,
* per-dimension skewness / excess kurtosis of within-class deviations after LDA,
* per-dimension standard deviation of test data vs the PLDA model in the
  diagonalized space, summarised by a mismatch index.

A large mismatch index suggests a domain shift, where the PLDA back-end is
preferred; otherwise cosine scoring is recommended.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DataError, EmbeddingSet, NumericError
from .numlin import simultaneous_diagonalize, symmetrize
from .plda import PldaModel, preprocess
from .scoring import COS, PLDA, length_normalize

MAX_PAIRS = 1_000_000
HIST_BINS = 100
HIST_RANGE = (0.0, 2.0)
DEFAULT_TAU = 0.2


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def density(self) -> np.ndarray:
        return self.counts / max(self.total, 1)


def _histogram(values) -> Histogram:
    counts, edges = np.histogram(np.clip(values, *HIST_RANGE), bins=HIST_BINS, range=HIST_RANGE)
    return Histogram(edges, counts)


def histogram_overlap(a: Histogram, b: Histogram) -> float:
    """Shared mass of two normalized histograms (1 = identical, 0 = disjoint)."""
    return float(np.minimum(a.density(), b.density()).sum())


def _within_pairs(spk, rng, cap):
    order = np.argsort(spk, kind="stable")
    bounds = np.flatnonzero(np.diff(spk[order])) + 1
    groups = np.split(order, bounds)
    sizes = np.array([len(g) for g in groups])
    n_pairs = sizes * (sizes - 1) // 2
    total = int(n_pairs.sum())
    if total <= cap:
        pairs = [np.stack(np.triu_indices(len(g), 1)) for g in groups if len(g) > 1]
        if not pairs:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        offs = [g for g in groups if len(g) > 1]
        i = np.concatenate([g[p[0]] for g, p in zip(offs, pairs)])
        j = np.concatenate([g[p[1]] for g, p in zip(offs, pairs)])
        return i, j
    # sample speakers proportional to their pair counts, then a random pair
    gi = rng.choice(len(groups), size=cap, p=n_pairs / total)
    n = sizes[gi]
    x = (rng.random(cap) * n).astype(np.int64)
    y = (rng.random(cap) * (n - 1)).astype(np.int64)
    y += y >= x
    start = np.concatenate([[0], np.cumsum(sizes)[:-1]])[gi]
    return order[start + x], order[start + y]


def _between_pairs(spk, rng, cap):
    n = spk.size
    total = n * (n - 1) // 2 - _count_within(spk)
    if total <= cap:
        i, j = np.triu_indices(n, 1)
        keep = spk[i] != spk[j]
        return i[keep], j[keep]
    i = np.empty(0, dtype=np.int64)
    j = np.empty(0, dtype=np.int64)
    while i.size < cap:
        a = rng.integers(0, n, size=cap)
        b = rng.integers(0, n, size=cap)
        keep = spk[a] != spk[b]
        i = np.concatenate([i, a[keep]])
        j = np.concatenate([j, b[keep]])
    return i[:cap], j[:cap]


def _count_within(spk):
    sizes = np.bincount(spk)
    return int((sizes * (sizes - 1) // 2).sum())


def distance_histograms(eset: EmbeddingSet, max_pairs: int = MAX_PAIRS, seed: int = 0):
    """Cosine-distance histograms ``(within, between)`` over same/cross-speaker pairs."""
    eset.require_labels("distance_histograms")
    if eset.n_speakers < 2:
        raise DataError("distance_histograms needs >= 2 speakers")
    rng = np.random.default_rng(seed)
    Xn = length_normalize(eset.X)
    spk = eset.spk_index
    out = []
    for i, j in (_within_pairs(spk, rng, max_pairs), _between_pairs(spk, rng, max_pairs)):
        d = 1.0 - np.clip(np.einsum("ij,ij->i", Xn[i], Xn[j]), -1.0, 1.0)
        out.append(_histogram(d))
    return out[0], out[1]


def _scatter_matrices(eset: EmbeddingSet):
    X = eset.X
    k = eset.spk_index
    counts = np.bincount(k).astype(np.float64)
    means = np.zeros((eset.n_speakers, eset.dim))
    np.add.at(means, k, X)
    means /= counts[:, None]
    mu = X.mean(axis=0)
    dev = X - means[k]
    Sw = symmetrize(dev.T @ dev / len(X))
    C = means - mu
    Sb = symmetrize((C * counts[:, None]).T @ C / len(X))
    return Sw, Sb, means


def lda_projection(eset: EmbeddingSet, out_dim: int) -> np.ndarray:
    """D x out_dim LDA projection; projected within-class covariance is the identity."""
    eset.require_labels("lda_projection")
    limit = min(eset.dim, eset.n_speakers - 1)
    if not 1 <= out_dim <= limit:
        raise DataError(f"out_dim must be in [1, {limit}], got {out_dim}")
    Sw, Sb, _ = _scatter_matrices(eset)
    U, _, _ = simultaneous_diagonalize(Sw, Sb)
    return U[:, :out_dim]


def standardized_moments(dev) -> tuple[np.ndarray, np.ndarray]:
    """Per-column skewness and excess kurtosis of already-centred data."""
    dev = np.asarray(dev, dtype=np.float64)
    m2 = np.mean(dev ** 2, axis=0)
    if np.any(m2 <= 0):
        raise NumericError("zero variance in a projected dimension")
    m3 = np.mean(dev ** 3, axis=0)
    m4 = np.mean(dev ** 4, axis=0)
    return m3 / m2 ** 1.5, m4 / m2 ** 2 - 3.0


def skewness_kurtosis(eset: EmbeddingSet, projection=None) -> tuple[np.ndarray, np.ndarray]:
    """Skewness and excess kurtosis of pooled within-class deviations, per projected dim."""
    eset.require_labels("skewness_kurtosis")
    counts = np.bincount(eset.spk_index)
    if np.any(counts < 2):
        raise DataError("every speaker needs >= 2 utterances")
    k = eset.spk_index
    means = np.zeros((eset.n_speakers, eset.dim))
    np.add.at(means, k, eset.X)
    means /= counts[:, None]
    dev = eset.X - means[k]
    if projection is not None:
        dev = dev @ np.asarray(projection, dtype=np.float64)
    return standardized_moments(dev)


def variance_profile(model: PldaModel, test: EmbeddingSet) -> tuple[np.ndarray, np.ndarray]:
    """Per-dimension model std ``sqrt(psi + 1)`` and test-data std in the PLDA frame."""
    if test.dim != model.dim:
        raise DataError(f"dimension mismatch: model {model.dim}, test {test.dim}")
    order = np.argsort(-model.psi, kind="stable")
    plda_std = np.sqrt(model.psi + 1.0)[order]
    u = preprocess(model, test.X)
    test_std = u.std(axis=0)[order]
    return plda_std, test_std


def mismatch_index(plda_std, test_std) -> float:
    """Mean absolute log-ratio of the two std profiles."""
    a = np.asarray(plda_std, dtype=np.float64)
    b = np.asarray(test_std, dtype=np.float64)
    if a.shape != b.shape:
        raise DataError("profiles differ in length")
    if np.any(a <= 0) or np.any(b <= 0):
        raise DataError("std profiles must be positive")
    return float(np.mean(np.abs(np.log(b / a))))


def recommend_backend(index: float, tau: float = DEFAULT_TAU) -> str:
    return COS if index <= tau else PLDA


@dataclass(frozen=True)
class DiagnosticsReport:
    plda_std: np.ndarray
    test_std: np.ndarray
    psi: np.ndarray
    mismatch_index: float
    recommendation: str
    tau: float
    within: Histogram | None = None
    between: Histogram | None = None
    skewness: np.ndarray | None = None
    kurtosis: np.ndarray | None = None


def diagnose(model: PldaModel, test: EmbeddingSet, train: EmbeddingSet | None = None,
             tau: float = DEFAULT_TAU, lda_dim: int | None = None, seed: int = 0) -> DiagnosticsReport:
    """Assemble a report; distribution views use ``train`` if given, else a labeled ``test``."""
    plda_std, test_std = variance_profile(model, test)
    idx = mismatch_index(plda_std, test_std)
    within = between = skew = kurt = None
    ref = train if train is not None else (test if test.is_labeled else None)
    if ref is not None:
        ref.require_labels("diagnostics")
        if ref.n_speakers >= 2:
            within, between = distance_histograms(ref, seed=seed)
            out_dim = lda_dim or min(ref.dim, ref.n_speakers - 1)
            if np.all(np.bincount(ref.spk_index) >= 2):
                skew, kurt = skewness_kurtosis(ref, lda_projection(ref, out_dim))
    return DiagnosticsReport(
        plda_std=plda_std,
        test_std=test_std,
        psi=np.sort(model.psi)[::-1],
        mismatch_index=idx,
        recommendation=recommend_backend(idx, tau),
        tau=tau,
        within=within,
        between=between,
        skewness=skew,
        kurtosis=kurt,
    )


def write_report(path, report: DiagnosticsReport) -> None:
    """Write the report as ``# block:`` separated CSV sections."""
    with open(path, "w", encoding="utf-8") as f:
        f.write("# block: summary\nkey,value\n")
        f.write(f"mismatch_index,{report.mismatch_index:.6f}\n")
        f.write(f"tau,{report.tau:.6f}\n")
        f.write(f"recommendation,{report.recommendation}\n")
        f.write("\n# block: variance_profile\ndim,psi,plda_std,test_std,ratio\n")
        for k, (p, a, b) in enumerate(zip(report.psi, report.plda_std, report.test_std)):
            f.write(f"{k},{p:.17g},{a:.17g},{b:.17g},{b / a:.17g}\n")
        for name, h in (("within_hist", report.within), ("between_hist", report.between)):
            if h is None:
                continue
            f.write(f"\n# block: {name}\nbin_lo,bin_hi,count\n")
            for lo, hi, c in zip(h.edges[:-1], h.edges[1:], h.counts):
                f.write(f"{lo:.4f},{hi:.4f},{int(c)}\n")
        if report.skewness is not None:
            f.write("\n# block: within_class_moments\ndim,skewness,excess_kurtosis\n")
            for k, (s, q) in enumerate(zip(report.skewness, report.kurtosis)):
                f.write(f"{k},{s:.17g},{q:.17g}\n")
