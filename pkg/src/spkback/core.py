"""Shared domain types: embeddings, embedding sets, trials and scores."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np


class SpkbackError(Exception):
    """Base class for all package errors."""


class DataError(SpkbackError, ValueError):
    """Input data violates a precondition (bad labels, ids, dimensions...)."""


class NumericError(SpkbackError, ArithmeticError):
    """A numerical procedure could not proceed (e.g. non-PD matrix after flooring)."""


class InvalidEmbeddingSet(DataError):
    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class Embedding:
    id: str
    vector: np.ndarray

    def __post_init__(self):
        v = np.array(self.vector, dtype=np.float64).reshape(-1)
        if v.size < 1:
            raise DataError(f"embedding {self.id!r} is empty")
        if not np.all(np.isfinite(v)):
            raise DataError(f"embedding {self.id!r} has non-finite entries")
        v.setflags(write=False)
        object.__setattr__(self, "vector", v)


def validate_embedding_set(ids, vectors, labels=None) -> list[str]:
    """Return every invariant violation of the given components.

    ``labels`` is either a sequence aligned with ``ids`` (``None`` entries mean
    unlabeled) or a mapping id -> speaker. An empty list means the components
    form a valid :class:`EmbeddingSet`.
    """
    report = []
    ids = [str(i) for i in ids]
    try:
        X = np.asarray(vectors, dtype=np.float64)
    except (ValueError, TypeError):
        rows = [np.asarray(v, dtype=np.float64).reshape(-1) for v in vectors]
        dims = sorted({r.size for r in rows})
        report.append(f"dimension mismatch: records have dims {dims}")
        X = None
    if X is not None:
        if X.ndim != 2:
            if X.size == 0 and len(ids) == 0:
                X = X.reshape(0, 1)
            else:
                report.append(f"vectors must form an N x D matrix, got shape {X.shape}")
                X = None
    if X is not None:
        if X.shape[0] != len(ids):
            report.append(f"{len(ids)} ids but {X.shape[0]} vectors")
        if X.shape[1] < 1:
            report.append("dimension must be >= 1")
        bad_rows = np.flatnonzero(~np.all(np.isfinite(X), axis=1))
        for r in bad_rows:
            name = ids[r] if r < len(ids) else f"#{r}"
            report.append(f"non-finite vector: {name}")

    seen = set()
    for i in ids:
        if i in seen:
            report.append(f"duplicate id: {i}")
        seen.add(i)

    if labels is not None:
        if isinstance(labels, Mapping):
            for key in labels:
                if key not in seen:
                    report.append(f"label for unknown id: {key}")
            for i in ids:
                if labels.get(i) in (None, ""):
                    report.append(f"missing label: {i}")
        else:
            labels = list(labels)
            if len(labels) != len(ids):
                report.append(f"{len(ids)} ids but {len(labels)} labels")
            else:
                for i, lab in zip(ids, labels):
                    if lab in (None, ""):
                        report.append(f"missing label: {i}")
    return report


@dataclass(frozen=True, eq=False)
class EmbeddingSet:
    """Immutable N x D matrix of embeddings with ids and optional speaker labels.

    Vectors are stored as float64 regardless of their source precision. Labels
    are kept aligned with ``ids`` and mapped once to dense integer indices
    (``spk_index``) for grouping.
    """

    ids: tuple
    X: np.ndarray
    labels: tuple | None = None
    domain: str | None = None
    speakers: tuple = field(init=False, repr=False, default=())
    spk_index: np.ndarray | None = field(init=False, repr=False, default=None)

    def __post_init__(self):
        ids = tuple(str(i) for i in self.ids)
        labels = self.labels
        violations = validate_embedding_set(ids, self.X, labels)
        if violations:
            raise InvalidEmbeddingSet(violations)
        if isinstance(labels, Mapping):
            labels = tuple(labels[i] for i in ids)
        X = np.array(self.X, dtype=np.float64, order="C")
        if X.ndim == 1:
            X = X.reshape(0, 1)
        X.setflags(write=False)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "X", X)
        if labels is not None:
            labels = tuple(str(lab) for lab in labels)
            speakers, inverse = np.unique(np.array(labels, dtype=object), return_inverse=True)
            inverse = inverse.astype(np.int64)
            inverse.setflags(write=False)
            object.__setattr__(self, "labels", labels)
            object.__setattr__(self, "speakers", tuple(speakers.tolist()))
            object.__setattr__(self, "spk_index", inverse)

    @classmethod
    def from_embeddings(cls, records: Iterable[Embedding], labels: Mapping[str, str] | None = None,
                        domain: str | None = None) -> "EmbeddingSet":
        records = list(records)
        ids = [r.id for r in records]
        X = np.stack([r.vector for r in records]) if records else np.zeros((0, 1))
        return cls(ids, X, labels, domain)

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def records(self) -> list[Embedding]:
        return [Embedding(i, x) for i, x in zip(self.ids, self.X)]

    @property
    def is_labeled(self) -> bool:
        return self.labels is not None

    @property
    def n_speakers(self) -> int:
        return len(self.speakers)

    def label_map(self) -> dict[str, str]:
        if self.labels is None:
            return {}
        return dict(zip(self.ids, self.labels))

    def index_of(self) -> dict[str, int]:
        return {i: k for k, i in enumerate(self.ids)}

    def subset(self, rows) -> "EmbeddingSet":
        rows = np.asarray(rows, dtype=np.int64)
        labels = None if self.labels is None else [self.labels[r] for r in rows]
        return EmbeddingSet([self.ids[r] for r in rows], self.X[rows], labels, self.domain)

    def with_vectors(self, X, domain: str | None = None) -> "EmbeddingSet":
        """Same ids and labels, new vectors."""
        return EmbeddingSet(self.ids, X, self.labels, self.domain if domain is None else domain)

    def require_labels(self, what: str = "operation") -> None:
        if self.labels is None:
            raise DataError(f"{what} requires a labeled embedding set")


def concat_sets(sets: Sequence[EmbeddingSet], domain: str | None = None) -> EmbeddingSet:
    if not sets:
        raise DataError("nothing to concatenate")
    dims = {s.dim for s in sets}
    if len(dims) != 1:
        raise DataError(f"dimension mismatch: {sorted(dims)}")
    labeled = [s.labels is not None for s in sets]
    if any(labeled) and not all(labeled):
        raise DataError("cannot mix labeled and unlabeled sets")
    ids = [i for s in sets for i in s.ids]
    labels = [lab for s in sets for lab in s.labels] if all(labeled) else None
    return EmbeddingSet(ids, np.vstack([s.X for s in sets]), labels, domain)


def split_by_speaker(eset: EmbeddingSet, fraction: float, seed: int) -> tuple[EmbeddingSet, EmbeddingSet]:
    """Partition speakers (not utterances) into two disjoint sets.

    The first set receives ``round(fraction * n_speakers)`` speakers, clamped so
    that both sides get at least one speaker when possible.
    """
    eset.require_labels("split_by_speaker")
    if not (0.0 < fraction < 1.0) or math.isnan(fraction):
        raise DataError(f"fraction must be in (0, 1), got {fraction}")
    n = eset.n_speakers
    k = int(round(fraction * n))
    if n >= 2:
        k = min(max(k, 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    first = np.zeros(n, dtype=bool)
    first[perm[:k]] = True
    mask = first[eset.spk_index]
    return eset.subset(np.flatnonzero(mask)), eset.subset(np.flatnonzero(~mask))


TRIAL_KEYS = ("target", "nontarget", "unknown")


@dataclass(frozen=True)
class Trial:
    enroll: str
    test: str
    key: str = "unknown"

    def __post_init__(self):
        if self.key not in TRIAL_KEYS:
            raise DataError(f"unknown trial key {self.key!r}")


@dataclass(frozen=True)
class TrialList:
    trials: tuple

    def __post_init__(self):
        trials = tuple(t if isinstance(t, Trial) else Trial(*t) for t in self.trials)
        seen = set()
        for t in trials:
            pair = (t.enroll, t.test)
            if pair in seen:
                raise DataError(f"duplicate trial: {t.enroll} {t.test}")
            seen.add(pair)
        object.__setattr__(self, "trials", trials)

    def __len__(self):
        return len(self.trials)

    def __iter__(self):
        return iter(self.trials)

    def key_map(self) -> dict[tuple[str, str], str]:
        return {(t.enroll, t.test): t.key for t in self.trials}


@dataclass(frozen=True)
class ScoreSet:
    enroll: tuple
    test: tuple
    scores: np.ndarray

    def __post_init__(self):
        enroll = tuple(self.enroll)
        test = tuple(self.test)
        scores = np.array(self.scores, dtype=np.float64).reshape(-1)
        if not (len(enroll) == len(test) == scores.size):
            raise DataError("score set columns differ in length")
        if not np.all(np.isfinite(scores)):
            raise NumericError("non-finite score")
        if len(set(zip(enroll, test))) != len(enroll):
            raise DataError("duplicate trial in score set")
        scores.setflags(write=False)
        object.__setattr__(self, "enroll", enroll)
        object.__setattr__(self, "test", test)
        object.__setattr__(self, "scores", scores)

    def __len__(self):
        return self.scores.size

    @property
    def entries(self) -> list[tuple[str, str, float]]:
        return [(e, t, float(s)) for e, t, s in zip(self.enroll, self.test, self.scores)]

    def as_dict(self) -> dict[tuple[str, str], float]:
        return {(e, t): float(s) for e, t, s in zip(self.enroll, self.test, self.scores)}
