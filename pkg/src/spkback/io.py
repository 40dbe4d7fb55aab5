"""On-disk formats: embeddings (CSV / EMB1 binary), trials, scores, PLDA1 models."""
from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .core import DataError, EmbeddingSet, ScoreSet, Trial, TrialList, TRIAL_KEYS
from .plda import PldaModel

EMB_MAGIC = b"EMB1"
PLDA_MAGIC = b"PLDA1"


class FormatError(DataError):
    code = "format"


class MagicMismatch(FormatError):
    code = "magic"


class TruncatedRecord(FormatError):
    code = "truncated"


class DimensionDisagreement(FormatError):
    code = "dimension"


class ParseError(FormatError):
    code = "parse"

    def __init__(self, path, line: int, msg: str):
        self.line = line
        super().__init__(f"{path}:{line}: {msg}")


def _fmt(path, fmt):
    if fmt is not None:
        if fmt not in ("csv", "bin"):
            raise DataError(f"unknown embedding format {fmt!r}")
        return fmt
    return "csv" if str(path).lower().endswith(".csv") else "bin"


# -- embeddings ---------------------------------------------------------------

def write_embeddings(path, eset: EmbeddingSet, fmt: str | None = None) -> None:
    if _fmt(path, fmt) == "csv":
        _write_csv(path, eset)
    else:
        _write_bin(path, eset)


def read_embeddings(path, fmt: str | None = None) -> EmbeddingSet:
    if _fmt(path, fmt) == "csv":
        return _read_csv(path)
    return _read_bin(path)


def _write_csv(path, eset):
    labels = eset.labels or ("",) * len(eset)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["id", "spk"] + [f"f{k}" for k in range(eset.dim)])
        for i, lab, x in zip(eset.ids, labels, eset.X):
            w.writerow([i, lab] + [format(v, ".17g") for v in x])


def _read_csv(path) -> EmbeddingSet:
    with open(path, newline="", encoding="utf-8") as f:
        rows = csv.reader(f)
        try:
            header = next(rows)
        except StopIteration:
            raise ParseError(path, 1, "empty file") from None
        if len(header) < 3 or header[0] != "id" or header[1] != "spk":
            raise ParseError(path, 1, "header must be id,spk,f0..f{D-1}")
        expected = [f"f{k}" for k in range(len(header) - 2)]
        if header[2:] != expected:
            raise ParseError(path, 1, "feature columns must be named f0..f{D-1}")
        dim = len(expected)
        ids, labels, X = [], [], []
        for lineno, row in enumerate(rows, start=2):
            if not row:
                continue
            if len(row) != dim + 2:
                raise ParseError(path, lineno, f"expected {dim + 2} columns, found {len(row)}")
            try:
                X.append([float(v) for v in row[2:]])
            except ValueError as exc:
                raise ParseError(path, lineno, str(exc)) from None
            ids.append(row[0])
            labels.append(row[1])
    X = np.array(X, dtype=np.float64).reshape(len(ids), dim)
    return EmbeddingSet(ids, X, labels if any(labels) else None)


def _write_bin(path, eset):
    labels = eset.labels or ("",) * len(eset)
    with open(path, "wb") as f:
        f.write(EMB_MAGIC)
        f.write(struct.pack("<II", eset.dim, len(eset)))
        for i, lab, x in zip(eset.ids, labels, eset.X):
            for s in (i, lab):
                b = s.encode("utf-8")
                if len(b) > 0xFFFF:
                    raise DataError(f"string too long for EMB1: {s[:20]}...")
                f.write(struct.pack("<H", len(b)))
                f.write(b)
            f.write(np.ascontiguousarray(x, dtype="<f8").tobytes())


class _Reader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedRecord(f"{self.path}: truncated while reading {what}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out


def _read_bin(path) -> EmbeddingSet:
    r = _Reader(Path(path).read_bytes(), path)
    if r.data[:4] != EMB_MAGIC:
        raise MagicMismatch(f"{path}: not an EMB1 file")
    r.pos = 4
    dim, count = struct.unpack("<II", r.take(8, "header"))
    if dim < 1:
        raise DimensionDisagreement(f"{path}: dimension must be >= 1")
    ids, labels = [], []
    X = np.empty((count, dim))
    for k in range(count):
        for out in (ids, labels):
            (n,) = struct.unpack("<H", r.take(2, f"record {k}"))
            out.append(r.take(n, f"record {k}").decode("utf-8"))
        X[k] = np.frombuffer(r.take(8 * dim, f"record {k} vector"), dtype="<f8")
    if r.pos != len(r.data):
        raise DimensionDisagreement(f"{path}: {len(r.data) - r.pos} trailing bytes; header dim/count disagree with payload")
    return EmbeddingSet(ids, X, labels if any(labels) else None)


# -- trials and scores --------------------------------------------------------

def _lines(path):
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if line:
                yield lineno, line.split()


def read_trials(path) -> TrialList:
    trials = []
    seen = set()
    for lineno, tok in _lines(path):
        if len(tok) not in (2, 3):
            raise ParseError(path, lineno, "expected 'enroll test [target|nontarget]'")
        key = tok[2] if len(tok) == 3 else "unknown"
        if key not in TRIAL_KEYS:
            raise ParseError(path, lineno, f"unknown key {key!r}")
        if (tok[0], tok[1]) in seen:
            raise ParseError(path, lineno, f"duplicate trial {tok[0]} {tok[1]}")
        seen.add((tok[0], tok[1]))
        trials.append(Trial(tok[0], tok[1], key))
    return TrialList(trials)


def write_trials(path, trials: TrialList) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for t in trials:
            f.write(f"{t.enroll} {t.test}" + ("" if t.key == "unknown" else f" {t.key}") + "\n")


def read_scores(path) -> ScoreSet:
    enroll, test, scores = [], [], []
    for lineno, tok in _lines(path):
        if len(tok) != 3:
            raise ParseError(path, lineno, "expected 'enroll test score'")
        try:
            s = float(tok[2])
        except ValueError:
            raise ParseError(path, lineno, f"bad score {tok[2]!r}") from None
        if not np.isfinite(s):
            raise ParseError(path, lineno, "non-finite score")
        enroll.append(tok[0])
        test.append(tok[1])
        scores.append(s)
    return ScoreSet(enroll, test, scores)


def write_scores(path, scores: ScoreSet) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for e, t, s in zip(scores.enroll, scores.test, scores.scores):
            f.write(f"{e} {t} {s:.6f}\n")


# -- PLDA models --------------------------------------------------------------

def save_plda(path, model: PldaModel) -> None:
    with open(path, "wb") as f:
        f.write(PLDA_MAGIC)
        f.write(struct.pack("<I", model.dim))
        for arr in (model.mean, model.A_inv, model.psi):
            f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_plda(path) -> PldaModel:
    data = Path(path).read_bytes()
    if data[:5] != PLDA_MAGIC:
        raise MagicMismatch(f"{path}: not a PLDA1 model")
    if len(data) < 9:
        raise TruncatedRecord(f"{path}: truncated header")
    (d,) = struct.unpack("<I", data[5:9])
    if d < 1:
        raise DimensionDisagreement(f"{path}: dimension must be >= 1")
    need = 9 + 8 * (2 * d + d * d)
    if len(data) < need:
        raise TruncatedRecord(f"{path}: expected {need} bytes, found {len(data)}")
    if len(data) > need:
        raise DimensionDisagreement(f"{path}: {len(data) - need} bytes beyond the declared dimension {d}")
    vals = np.frombuffer(data, dtype="<f8", offset=9).astype(np.float64)
    mean = vals[:d]
    A_inv = vals[d:d + d * d].reshape(d, d)
    psi = vals[d + d * d:]
    return PldaModel(mean, A_inv, psi)
