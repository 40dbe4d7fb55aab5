"""Synthetic embedding laboratory.

Embeddings are drawn from a known two-covariance generator, optionally pushed
through a domain shift (rotation, per-dimension scale, mean shift, ReLU-type
truncation), and the back-ends are compared on speaker-disjoint trials.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import ortho_group

from .adaptation import AdaptConfig, coral_adapt_embeddings, coral_adapt_model, coral_plus_adapt_model
from .core import DataError, EmbeddingSet, TrialList, concat_sets
from .metrics import LabeledScores, summarize
from .numlin import sample_mean_cov
from .plda import PldaFitConfig, PldaModel, fit_plda
from .scoring import COS, PLDA, Backend, score_pairs

logger = logging.getLogger(__name__)

NONLINEARITIES = ("none", "relu", "shifted_relu")
ADAPTATIONS = ("none", "coral", "coral_plus")


@dataclass(frozen=True, eq=False)
class GeneratorModel:
    """Ground-truth generator ``x = mean + A u``, ``u ~ N(v, I)``, ``v ~ N(0, diag(psi))``."""

    mean: np.ndarray
    A: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=np.float64).reshape(-1)
        A = np.array(self.A, dtype=np.float64)
        psi = np.array(self.psi, dtype=np.float64).reshape(-1)
        if A.shape != (mean.size, mean.size) or psi.size != mean.size:
            raise DataError("inconsistent generator shapes")
        if np.any(psi < 0):
            raise DataError("psi must be non-negative")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "psi", psi)

    @property
    def dim(self) -> int:
        return self.mean.size

    def marginal_std(self) -> float:
        """RMS per-coordinate standard deviation of generated embeddings."""
        return float(np.sqrt(np.trace((self.A * (self.psi + 1.0)) @ self.A.T) / self.dim))

    def to_plda_model(self) -> PldaModel:
        return PldaModel(self.mean, np.linalg.inv(self.A), self.psi)


def default_truth(dim: int = 32, psi_min: float = 0.1, psi_max: float = 50.0, seed: int = 0,
                  rotate: bool = True) -> GeneratorModel:
    """Log-spaced decaying between-class variances, random orthogonal mixing."""
    psi = np.geomspace(psi_max, psi_min, dim)
    A = ortho_group.rvs(dim, random_state=seed) if rotate and dim > 1 else np.eye(dim)
    return GeneratorModel(np.zeros(dim), A, psi)


def sample_plda(truth: GeneratorModel, n_speakers: int, n_sessions: int, seed: int,
                prefix: str = "spk", domain: str | None = None) -> EmbeddingSet:
    if n_speakers < 1 or n_sessions < 1:
        raise DataError("n_speakers and n_sessions must be >= 1")
    rng = np.random.default_rng(seed)
    D = truth.dim
    v = rng.standard_normal((n_speakers, D)) * np.sqrt(truth.psi)
    u = np.repeat(v, n_sessions, axis=0) + rng.standard_normal((n_speakers * n_sessions, D))
    X = truth.mean + u @ truth.A.T
    spk = [f"{prefix}{s:05d}" for s in range(n_speakers)]
    ids = [f"{s}-{i:03d}" for s in spk for i in range(n_sessions)]
    labels = [s for s in spk for _ in range(n_sessions)]
    return EmbeddingSet(ids, X, labels, domain)


@dataclass(frozen=True, eq=False)
class DomainSpec:
    mean_shift: np.ndarray | None = None
    rotation: np.ndarray | None = None
    scale: np.ndarray | None = None
    nonlinearity: str = "none"
    offset: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.nonlinearity not in NONLINEARITIES:
            raise DataError(f"unknown nonlinearity {self.nonlinearity!r}")
        for name in ("mean_shift", "rotation", "scale"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, np.array(val, dtype=np.float64))
        if self.scale is not None and np.any(self.scale <= 0):
            raise DataError("scale entries must be > 0")
        if self.rotation is not None:
            R = self.rotation
            if R.ndim != 2 or R.shape[0] != R.shape[1] or np.max(np.abs(R.T @ R - np.eye(len(R)))) > 1e-10:
                raise DataError("rotation must be orthogonal")

    @classmethod
    def identity(cls) -> "DomainSpec":
        return cls()

    @classmethod
    def cross_domain(cls, dim: int, seed: int, scale_range=(0.5, 2.0), shift_norm: float = 1.0,
                     rotate: bool = False) -> "DomainSpec":
        """Log-uniform per-dimension scale plus a random mean shift of fixed norm."""
        rng = np.random.default_rng(seed)
        lo, hi = np.log(scale_range[0]), np.log(scale_range[1])
        scale = np.exp(rng.uniform(lo, hi, dim))
        shift = rng.standard_normal(dim)
        shift *= shift_norm / np.linalg.norm(shift)
        R = ortho_group.rvs(dim, random_state=seed + 1) if rotate and dim > 1 else None
        return cls(mean_shift=shift, rotation=R, scale=scale, seed=seed)

    def with_offset(self, offset: float) -> "DomainSpec":
        return replace(self, offset=float(offset))

    @classmethod
    def truncation(cls, dim: int, seed: int, offset: float, nonlinearity: str = "shifted_relu") -> "DomainSpec":
        """Random rotation followed by coordinatewise ReLU-type truncation."""
        R = ortho_group.rvs(dim, random_state=seed) if dim > 1 else np.eye(1)
        return cls(rotation=R, nonlinearity=nonlinearity, offset=offset, seed=seed)


def apply_nonlinearity(X, kind: str, offset: float = 0.0):
    if kind == "none":
        return X
    if kind == "relu":
        return np.maximum(X, 0.0)
    if kind == "shifted_relu":
        return np.maximum(X - offset, 0.0) + offset
    raise DataError(f"unknown nonlinearity {kind!r}")


def apply_domain_shift(eset: EmbeddingSet, spec: DomainSpec) -> EmbeddingSet:
    """Rotate, scale, add the mean shift, then apply the nonlinearity."""
    X = eset.X
    D = eset.dim
    for name in ("mean_shift", "scale"):
        val = getattr(spec, name)
        if val is not None and val.shape != (D,):
            raise DataError(f"{name} has shape {val.shape}, data dim is {D}")
    if spec.rotation is not None:
        if spec.rotation.shape != (D, D):
            raise DataError("rotation dimension mismatch")
        X = X @ spec.rotation.T
    if spec.scale is not None:
        X = X * spec.scale
    if spec.mean_shift is not None:
        X = X + spec.mean_shift
    X = apply_nonlinearity(X, spec.nonlinearity, spec.offset)
    return eset.with_vectors(X)


def trial_indices(eset: EmbeddingSet, seed: int):
    """All same-speaker pairs as targets plus as many distinct random cross-speaker pairs.

    Fewer nontargets are returned only when fewer cross-speaker pairs exist.
    """
    eset.require_labels("trial construction")
    spk = eset.spk_index
    order = np.argsort(spk, kind="stable")
    ti, tj = [], []
    for g in np.split(order, np.flatnonzero(np.diff(spk[order])) + 1):
        a, b = np.triu_indices(len(g), 1)
        ti.append(g[a])
        tj.append(g[b])
    ti = np.concatenate(ti)
    tj = np.concatenate(tj)
    n_tar = ti.size
    if n_tar == 0:
        raise DataError("no target pairs: every speaker needs >= 2 utterances")
    if eset.n_speakers < 2:
        raise DataError("no nontarget pairs: need >= 2 speakers")
    rng = np.random.default_rng(seed)
    n = len(eset)
    sizes = np.bincount(spk)
    n_between = (n * n - int((sizes ** 2).sum())) // 2
    want = min(n_tar, n_between)
    seen: set[tuple[int, int]] = set()
    ni, nj = [], []
    while len(ni) < want:
        a = rng.integers(0, n, size=2 * n_tar)
        b = rng.integers(0, n, size=2 * n_tar)
        for x, y in zip(a.tolist(), b.tolist()):
            if spk[x] == spk[y]:
                continue
            key = (min(x, y), max(x, y))
            if key in seen:
                continue
            seen.add(key)
            ni.append(key[0])
            nj.append(key[1])
            if len(ni) == want:
                break
    i = np.concatenate([ti, np.array(ni, dtype=np.int64)])
    j = np.concatenate([tj, np.array(nj, dtype=np.int64)])
    is_target = np.zeros(i.size, dtype=bool)
    is_target[:n_tar] = True
    return i, j, is_target


def make_trials(eset: EmbeddingSet, seed: int) -> TrialList:
    i, j, tgt = trial_indices(eset, seed)
    ids = eset.ids
    return TrialList([(ids[a], ids[b], "target" if t else "nontarget") for a, b, t in zip(i, j, tgt)])


@dataclass(frozen=True)
class DomainSample:
    spec: DomainSpec
    n_speakers: int
    n_sessions: int


@dataclass(frozen=True, eq=False)
class ExperimentPlan:
    truth: GeneratorModel
    train: tuple
    test: DomainSample
    backends: tuple = (COS, PLDA)
    adaptation: tuple = ("none",)
    adapt_speakers: int = 200
    adapt_sessions: int = 5
    seed: int = 0
    plda: PldaFitConfig = field(default_factory=PldaFitConfig)
    adapt: AdaptConfig = field(default_factory=AdaptConfig)
    cos_center: bool = True
    name: str = "plan"

    def __post_init__(self):
        object.__setattr__(self, "train", tuple(self.train))
        object.__setattr__(self, "backends", tuple(self.backends))
        object.__setattr__(self, "adaptation", tuple(self.adaptation))
        if not self.train:
            raise DataError("plan needs at least one training domain")
        for b in self.backends:
            if b not in (COS, PLDA):
                raise DataError(f"unknown backend {b!r}")
        for a in self.adaptation:
            if a not in ADAPTATIONS:
                raise DataError(f"unknown adaptation {a!r}")
        if sum(t.n_speakers for t in self.train) < 2:
            raise DataError("training data needs >= 2 speakers")
        if self.test.n_speakers < 2 or self.test.n_sessions < 2:
            raise DataError("test domain needs >= 2 speakers with >= 2 sessions")

    def with_seed(self, seed: int) -> "ExperimentPlan":
        return replace(self, seed=seed)


def build_data(plan: ExperimentPlan):
    """Sample ``(train, test, in_domain)`` sets; speakers never overlap."""
    ss = np.random.SeedSequence(plan.seed)
    seeds = [int(s.generate_state(1)[0]) for s in ss.spawn(len(plan.train) + 2)]
    train = [
        apply_domain_shift(sample_plda(plan.truth, d.n_speakers, d.n_sessions, seeds[k], prefix=f"tr{k}_"), d.spec)
        for k, d in enumerate(plan.train)
    ]
    train = concat_sets(train, domain="train")
    t = plan.test
    test = apply_domain_shift(sample_plda(plan.truth, t.n_speakers, t.n_sessions, seeds[-2], prefix="te_"), t.spec)
    indom = apply_domain_shift(
        sample_plda(plan.truth, plan.adapt_speakers, plan.adapt_sessions, seeds[-1], prefix="ad_"), t.spec)
    return train, test.with_vectors(test.X, domain="test"), indom.with_vectors(indom.X, domain="test")


def _plda_model(adapt: str, base: PldaModel, indom: EmbeddingSet, plan: ExperimentPlan) -> PldaModel:
    if adapt == "coral":
        return coral_adapt_model(base, indom, plan.adapt.floor)
    if adapt == "coral_plus":
        return coral_plus_adapt_model(base, indom, plan.adapt)
    return base


def run_condition(plan: ExperimentPlan) -> list[dict]:
    """Score the plan's test trials with every backend x adaptation cell.

    Cosine scoring uses no training data, so only its ``none`` cell is run.
    """
    train, test, indom = build_data(plan)
    i, j, is_target = trial_indices(test, plan.seed)
    base = fit_plda(train, plan.plda) if PLDA in plan.backends else None
    center = train.X.mean(axis=0) if plan.cos_center else None
    rows = []
    for backend in plan.backends:
        for adapt in plan.adaptation:
            if backend == COS:
                if adapt != "none":
                    continue
                be = Backend.cos(center)
            else:
                be = Backend.plda(_plda_model(adapt, base, indom, plan))
            scores = score_pairs(be, test.X, test.X, i, j)
            row = {"plan": plan.name, "seed": plan.seed, "backend": backend, "adaptation": adapt}
            row.update(summarize(LabeledScores(scores[is_target], scores[~is_target])))
            rows.append(row)
            logger.info("%s seed=%d %s/%s eer=%.4f min_dcf=%.4f min_cp=%.4f", plan.name, plan.seed,
                        backend, adapt, row["eer"], row["min_dcf"], row["min_cp"])
    return rows


def run_seeds(plan: ExperimentPlan, seeds) -> list[dict]:
    rows = []
    for seed in seeds:
        rows.extend(run_condition(plan.with_seed(int(seed))))
    return rows


def coral_embedding_check(plan: ExperimentPlan) -> float:
    """Largest covariance error after CORAL-mapping the training set onto the in-domain set."""
    train, _, indom = build_data(plan)
    adapted = coral_adapt_embeddings(train, indom)
    _, c1 = sample_mean_cov(adapted.X)
    _, c2 = sample_mean_cov(indom.X)
    return float(np.max(np.abs(c1 - c2)) / np.max(np.abs(c2)))
