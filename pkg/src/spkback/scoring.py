"""Cosine and PLDA back-ends behind a single trial-scoring entry point."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import DataError, EmbeddingSet, ScoreSet, TrialList
from .plda import PldaModel, preprocess

COS = "cos"
PLDA = "plda"


@dataclass(frozen=True, eq=False)
class Backend:
    """``kind`` is ``"cos"`` or ``"plda"``.

    A cosine back-end may carry a ``center`` vector (typically the training
    mean) subtracted before length normalization; PLDA centers with its own mean.
    """

    kind: str
    model: PldaModel | None = None
    center: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in (COS, PLDA):
            raise DataError(f"unknown backend {self.kind!r}")
        if self.kind == PLDA and not isinstance(self.model, PldaModel):
            raise DataError("PLDA backend requires a model")
        if self.center is not None:
            if self.kind != COS:
                raise DataError("center only applies to the cosine backend")
            object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64).reshape(-1))

    @classmethod
    def cos(cls, center=None):
        return cls(COS, center=center)

    @classmethod
    def plda(cls, model: PldaModel):
        return cls(PLDA, model)


def cosine_score(x1, x2) -> float:
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    if x1.shape != x2.shape:
        raise DataError("dimension mismatch")
    n1, n2 = np.linalg.norm(x1), np.linalg.norm(x2)
    if n1 == 0 or n2 == 0:
        raise DataError("cosine score of a zero vector")
    return float(np.clip(np.dot(x1 / n1, x2 / n2), -1.0, 1.0))


def length_normalize(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    norms = np.linalg.norm(X, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise DataError("cannot length-normalize a zero vector")
    return X / norms


def resolve_enrollment(enroll: EmbeddingSet, ids) -> tuple[np.ndarray, dict[str, int]]:
    """Build one vector per distinct enrollment id.

    An id naming a record is used as-is; otherwise it is looked up as a
    speaker label and that speaker's embeddings are averaged.
    """
    rows = enroll.index_of()
    by_label: dict[str, list[int]] = {}
    if enroll.labels is not None:
        for r, lab in enumerate(enroll.labels):
            by_label.setdefault(lab, []).append(r)
    uniq = list(dict.fromkeys(ids))
    out = np.empty((len(uniq), enroll.dim))
    for k, eid in enumerate(uniq):
        if eid in rows:
            out[k] = enroll.X[rows[eid]]
        elif eid in by_label:
            out[k] = enroll.X[by_label[eid]].mean(axis=0)
        else:
            raise DataError(f"unresolvable enrollment id: {eid}")
    return out, {eid: k for k, eid in enumerate(uniq)}


def _run_chunked(fn, n, workers):
    if workers is None or workers <= 1 or n < 2:
        fn(0, n)
        return
    bounds = np.linspace(0, n, min(workers, n) + 1).astype(int)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(lambda ab: fn(*ab), zip(bounds[:-1], bounds[1:])))


def score_pairs(backend: Backend, E, T, ei, ti, workers: int = 1) -> np.ndarray:
    """Score rows ``E[ei[k]]`` against ``T[ti[k]]`` with the backend."""
    E = np.asarray(E, dtype=np.float64)
    T = np.asarray(T, dtype=np.float64)
    ei = np.ascontiguousarray(ei, dtype=np.int64)
    ti = np.ascontiguousarray(ti, dtype=np.int64)
    dim = backend.model.dim if backend.kind == PLDA else E.shape[1]
    if E.shape[1] != dim or T.shape[1] != dim:
        raise DataError(f"dimension mismatch: backend {dim}, data {E.shape[1]}/{T.shape[1]}")
    out = np.empty(ei.size)
    if backend.kind == COS:
        if backend.center is not None:
            if backend.center.size != dim:
                raise DataError("center dimension mismatch")
            E = E - backend.center
            T = T - backend.center
        E = np.ascontiguousarray(length_normalize(E))
        T = np.ascontiguousarray(length_normalize(T))

        def work(a, b):
            kernels.dot_pairs(E, T, ei[a:b], ti[a:b], out[a:b])
    else:
        m = backend.model
        E = np.ascontiguousarray(preprocess(m, E))
        T = np.ascontiguousarray(preprocess(m, T))

        def work(a, b):
            kernels.llr_pairs(E, T, ei[a:b], ti[a:b], m.psi, m.const_c, m.const_m, out[a:b])

    _run_chunked(work, ei.size, workers)
    if backend.kind == COS:
        np.clip(out, -1.0, 1.0, out=out)
    return out


def score_trials(backend: Backend, enroll: EmbeddingSet, test: EmbeddingSet, trials: TrialList,
                 workers: int = 1) -> ScoreSet:
    E, emap = resolve_enrollment(enroll, [t.enroll for t in trials])
    tmap = test.index_of()
    try:
        ti = [tmap[t.test] for t in trials]
    except KeyError as exc:
        raise DataError(f"unresolvable test id: {exc.args[0]}") from None
    ei = [emap[t.enroll] for t in trials]
    scores = score_pairs(backend, E, test.X, ei, ti, workers)
    return ScoreSet([t.enroll for t in trials], [t.test for t in trials], scores)
