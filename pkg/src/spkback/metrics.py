"""Detection metrics: DET operating points, EER, minDCF and min C_primary.

Convention: a trial is accepted iff ``score >= threshold``. Operating points
are taken at every distinct score plus ``+inf`` (reject everything).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DataError, ScoreSet, TrialList

CPRIMARY_P_TARGETS = (0.01, 0.005)


@dataclass(frozen=True)
class LabeledScores:
    target_scores: np.ndarray
    nontarget_scores: np.ndarray

    def __post_init__(self):
        for name in ("target_scores", "nontarget_scores"):
            arr = np.array(getattr(self, name), dtype=np.float64).reshape(-1)
            if not np.all(np.isfinite(arr)):
                raise DataError(f"{name} contains non-finite values")
            object.__setattr__(self, name, arr)

    def check(self):
        if self.target_scores.size == 0 or self.nontarget_scores.size == 0:
            raise DataError("need at least one target and one nontarget score")

    @classmethod
    def from_scores(cls, scores: ScoreSet, trials: TrialList) -> "LabeledScores":
        """Join scores with trial keys; trials keyed ``unknown`` are skipped."""
        keys = trials.key_map()
        tar, non = [], []
        for e, t, s in zip(scores.enroll, scores.test, scores.scores):
            key = keys.get((e, t))
            if key is None:
                raise DataError(f"score for trial not in key: {e} {t}")
            if key == "target":
                tar.append(s)
            elif key == "nontarget":
                non.append(s)
        return cls(np.array(tar), np.array(non))


def det_points(s: LabeledScores) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(thresholds, p_miss, p_fa)`` ordered by increasing threshold."""
    s.check()
    tar = np.sort(s.target_scores)
    non = np.sort(s.nontarget_scores)
    thr = np.unique(np.concatenate([tar, non]))
    thr = np.append(thr, np.inf)
    n_miss = np.searchsorted(tar, thr, side="left")
    n_fa = non.size - np.searchsorted(non, thr, side="left")
    return thr, n_miss / tar.size, n_fa / non.size


def eer_from_curve(p_miss, p_fa) -> float:
    """EER at the crossing of the piecewise-linear miss and false-alarm curves."""
    d = p_miss - p_fa
    # d is non-decreasing, starts at -1 (accept all) and ends at +1 (reject all)
    k = int(np.argmax(d >= 0))
    if d[k] == 0:
        return float(p_miss[k])
    d0, d1 = d[k - 1], d[k]
    t = d0 / (d0 - d1)
    return float(p_miss[k - 1] + t * (p_miss[k] - p_miss[k - 1]))


def eer(s: LabeledScores) -> float:
    _, pm, pf = det_points(s)
    return eer_from_curve(pm, pf)


def normalized_dcf(p_miss, p_fa, p_target: float, c_miss: float = 1.0, c_fa: float = 1.0):
    if not 0.0 < p_target < 1.0:
        raise DataError(f"p_target must be in (0, 1), got {p_target}")
    if not (c_miss > 0 and c_fa > 0):
        raise DataError("costs must be positive")
    a = c_miss * p_target
    b = c_fa * (1.0 - p_target)
    return (a * np.asarray(p_miss) + b * np.asarray(p_fa)) / min(a, b)


def min_dcf(s: LabeledScores, p_target: float = 0.01, c_miss: float = 1.0, c_fa: float = 1.0) -> float:
    _, pm, pf = det_points(s)
    return float(np.min(normalized_dcf(pm, pf, p_target, c_miss, c_fa)))


def min_cprimary(s: LabeledScores, p_targets=CPRIMARY_P_TARGETS) -> float:
    _, pm, pf = det_points(s)
    vals = [float(np.min(normalized_dcf(pm, pf, p))) for p in p_targets]
    return float(np.mean(vals))


def summarize(s: LabeledScores, p_target: float = 0.01) -> dict[str, float]:
    _, pm, pf = det_points(s)
    return {
        "eer": eer_from_curve(pm, pf),
        "min_dcf": float(np.min(normalized_dcf(pm, pf, p_target))),
        "min_cp": float(np.mean([np.min(normalized_dcf(pm, pf, p)) for p in CPRIMARY_P_TARGETS])),
    }
