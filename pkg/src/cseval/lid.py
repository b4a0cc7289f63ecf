"""Language identification metrics over per-segment English/Mandarin scores.

English is the target class.  A segment's detection score is
``score_english - score_mandarin``; it is accepted as English at threshold
``t`` iff ``score >= t``.  Hard decisions (for accuracy and balanced
accuracy) are English iff the score is strictly positive.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .annotations import ENGLISH, MANDARIN, Grain
from .formats import ScoredSegment, SegmentId


class DegenerateTrialSetError(ValueError):
    pass


class ScoringError(ValueError):
    pass


@dataclass(frozen=True)
class Trial:
    id: SegmentId
    score: float
    is_target: bool
    audio_name: str

    @property
    def decision_english(self) -> bool:
        return self.score > 0

    @property
    def correct(self) -> bool:
        return self.decision_english == self.is_target


@dataclass
class TrialSet:
    trials: list[Trial]
    n_excluded_overlap: int = 0
    n_excluded_nontarget_label: int = 0
    n_unscored: int = 0


def build_trials(
    grains: Iterable[Grain],
    scored: Iterable[ScoredSegment],
    require_all: bool = True,
) -> TrialSet:
    """Pair eligible reference grains with their scores.

    Eligible grains are English/Mandarin without the overlap flag.  Scores for
    ineligible grains are ignored; scores for ids not in the reference raise.
    """
    by_id = {}
    for s in scored:
        by_id[s.id] = s
    result = TrialSet([])
    known = set()
    for g in grains:
        sid = SegmentId.from_grain(g)
        known.add(sid)
        if g.language not in (ENGLISH, MANDARIN):
            result.n_excluded_nontarget_label += 1
            continue
        if g.overlap_diff_lang:
            result.n_excluded_overlap += 1
            continue
        s = by_id.get(sid)
        if s is None:
            if require_all:
                raise ScoringError(f"no score for segment {sid}")
            result.n_unscored += 1
            continue
        result.trials.append(Trial(sid, s.score_english - s.score_mandarin, g.language is ENGLISH, g.audio_name))
    unknown = [sid for sid in by_id if sid not in known]
    if unknown:
        raise ScoringError(f"scored segment {unknown[0]} has no reference grain")
    return result


@dataclass
class DetCurve:
    thresholds: np.ndarray
    far: np.ndarray
    frr: np.ndarray

    def points(self) -> list[tuple[float, float, float]]:
        return list(zip(self.thresholds.tolist(), self.far.tolist(), self.frr.tolist()))


def _split(trials: Sequence[Trial]) -> tuple[np.ndarray, np.ndarray]:
    tgt = np.array([t.score for t in trials if t.is_target], dtype=float)
    non = np.array([t.score for t in trials if not t.is_target], dtype=float)
    if not len(tgt) or not len(non):
        raise DegenerateTrialSetError(
            f"need both English and Mandarin trials, got {len(tgt)} English and {len(non)} Mandarin")
    return tgt, non


def det_curve(trials: Sequence[Trial]) -> DetCurve:
    """Operating points at every distinct score, plus a reject-all point at +inf."""
    tgt, non = _split(trials)
    thresholds = np.unique(np.concatenate([tgt, non]))
    tgt.sort()
    non.sort()
    # number of scores strictly below each threshold
    tgt_below = np.searchsorted(tgt, thresholds, side="left")
    non_below = np.searchsorted(non, thresholds, side="left")
    far = np.append((len(non) - non_below) / len(non), 0.0)
    frr = np.append(tgt_below / len(tgt), 1.0)
    return DetCurve(np.append(thresholds, np.inf), far, frr)


def equal_error_rate(trials: Sequence[Trial]) -> float:
    """Rate where FAR and FRR cross, interpolated linearly between operating points."""
    curve = det_curve(trials)
    diff = curve.far - curve.frr
    i = int(np.argmax(diff <= 0))
    if diff[i] == 0:
        return float(curve.far[i])
    a, b = i - 1, i
    alpha = diff[a] / (diff[a] - diff[b])
    return float(curve.far[a] + alpha * (curve.far[b] - curve.far[a]))


@dataclass
class FileBalancedAccuracy:
    audio_name: str
    n_english: int
    n_mandarin: int
    recall_english: float | None
    recall_mandarin: float | None
    balanced_accuracy: float
    single_language: bool


def _recall(trials: list[Trial]) -> Fraction | None:
    if not trials:
        return None
    return Fraction(sum(t.correct for t in trials), len(trials))


def balanced_accuracy(trials: Iterable[Trial]) -> tuple[list[FileBalancedAccuracy], float]:
    """Per-file mean of English and Mandarin recall, and their unweighted mean over files.

    A file with only one reference language scores that language's recall.
    Arithmetic is exact until the final conversion to float.
    """
    by_file: dict[str, list[Trial]] = defaultdict(list)
    for t in trials:
        by_file[t.audio_name].append(t)
    rows, values = [], []
    for audio in sorted(by_file):
        ts = by_file[audio]
        re = _recall([t for t in ts if t.is_target])
        rm = _recall([t for t in ts if not t.is_target])
        present = [r for r in (re, rm) if r is not None]
        ba = sum(present) / len(present)
        values.append(ba)
        rows.append(FileBalancedAccuracy(
            audio, sum(t.is_target for t in ts), sum(not t.is_target for t in ts),
            None if re is None else float(re), None if rm is None else float(rm),
            float(ba), len(present) == 1))
    if not values:
        raise DegenerateTrialSetError("no trials to compute balanced accuracy over")
    return rows, float(sum(values) / len(values))


def pooled_balanced_accuracy(trials: Sequence[Trial]) -> float:
    present = [r for r in (_recall([t for t in trials if t.is_target]),
                           _recall([t for t in trials if not t.is_target])) if r is not None]
    if not present:
        raise DegenerateTrialSetError("no trials")
    return float(sum(present) / len(present))


def accuracy(trials: Sequence[Trial]) -> float:
    if not trials:
        raise DegenerateTrialSetError("no trials to compute accuracy over")
    return float(Fraction(sum(t.correct for t in trials), len(trials)))


def far_frr_at(trials: Sequence[Trial], threshold: float = 0.0) -> tuple[float, float]:
    tgt, non = _split(trials)
    return float(np.mean(non >= threshold)), float(np.mean(tgt < threshold))


@dataclass
class LidReport:
    eer: float
    balanced_accuracy_macro: float
    balanced_accuracy_pooled: float
    balanced_accuracy_per_file: list[FileBalancedAccuracy]
    accuracy: float
    far_at_zero: float
    frr_at_zero: float
    n_targets: int
    n_nontargets: int
    n_excluded_overlap: int
    n_excluded_nontarget_label: int
    decisions_tied: int
    eer_per_file: dict[str, float | None] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def score_lid(trial_set: TrialSet) -> LidReport:
    trials = trial_set.trials
    eer = equal_error_rate(trials)
    per_file, macro = balanced_accuracy(trials)
    by_file: dict[str, list[Trial]] = defaultdict(list)
    for t in trials:
        by_file[t.audio_name].append(t)
    eer_per_file = {}
    for audio in sorted(by_file):
        try:
            eer_per_file[audio] = equal_error_rate(by_file[audio])
        except DegenerateTrialSetError:
            eer_per_file[audio] = None
    far0, frr0 = far_frr_at(trials, np.nextafter(0.0, 1.0))
    return LidReport(
        eer=eer,
        balanced_accuracy_macro=macro,
        balanced_accuracy_pooled=pooled_balanced_accuracy(trials),
        balanced_accuracy_per_file=per_file,
        accuracy=accuracy(trials),
        far_at_zero=far0,
        frr_at_zero=frr0,
        n_targets=sum(t.is_target for t in trials),
        n_nontargets=sum(not t.is_target for t in trials),
        n_excluded_overlap=trial_set.n_excluded_overlap,
        n_excluded_nontarget_label=trial_set.n_excluded_nontarget_label,
        decisions_tied=sum(t.score == 0 for t in trials),
        eer_per_file=eer_per_file,
    )
