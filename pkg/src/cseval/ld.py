"""Language diarization error rate with exact millisecond accounting.

At every scored instant the reference and hypothesis each assert a set of
languages (subsets of {English, Mandarin}; overlapping speech may assert
both).  With reference set R and hypothesis set H:

    correct        += |R & H|
    language_error += min(|R|, |H|) - |R & H|
    missed         += max(0, |R| - |H|)
    false_alarm    += max(0, |H| - |R|)
    ref_speech     += |R|

:func:`score_recording` evaluates this with interval sweeps;
:func:`brute_force_score` evaluates it on an explicit millisecond grid and
exists to check the former.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from typing import Iterable, Mapping, Sequence

import numpy as np

from .annotations import ENGLISH, MANDARIN, NON_EVALUATED, Grain, group_by_recording, recording_stem
from .formats import LanguageTurn
from .timeline import EMPTY, Interval, SpanSet, normalize, partition, subtract

REF_SPEECH = "ref-speech"
SCORED_REGION = "scored-region"
ORACLE_LIMIT_MS = 10_000_000


class UndefinedMetricError(ValueError):
    pass


class TimelineMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class ReferenceTimeline:
    audio_name: str
    english: SpanSet
    mandarin: SpanSet
    excluded: SpanSet
    scored_region: SpanSet
    clipped_ms: int = 0


@dataclass(frozen=True)
class HypothesisTimeline:
    audio_name: str
    english: SpanSet
    mandarin: SpanSet
    scored_region: SpanSet


@dataclass
class DerBreakdown:
    correct_ms: int = 0
    language_error_ms: int = 0
    missed_ms: int = 0
    false_alarm_ms: int = 0
    ref_speech_ms: int = 0
    scored_region_ms: int = 0
    english_ref_ms: int = 0
    mandarin_ref_ms: int = 0
    english_error_ms: int = 0
    mandarin_error_ms: int = 0

    def __add__(self, other: "DerBreakdown") -> "DerBreakdown":
        return DerBreakdown(**{f.name: getattr(self, f.name) + getattr(other, f.name) for f in fields(self)})

    def to_dict(self) -> dict:
        return asdict(self)


def collar_zone(english: SpanSet, mandarin: SpanSet, collar_ms: int) -> SpanSet:
    """``collar_ms`` either side of every reference language-turn boundary."""
    if collar_ms <= 0:
        return EMPTY
    points = set(english.boundaries()) | set(mandarin.boundaries())
    return normalize((max(0, p - collar_ms), p + collar_ms) for p in points)


def build_reference_timeline(
    audio_name: str,
    grains: Iterable[Grain],
    regions: SpanSet,
    excluded: SpanSet = EMPTY,
    collar_ms: int = 0,
) -> ReferenceTimeline:
    """Scored region = evaluated regions minus non-evaluated speech, redactions and collars.

    Overlap-flagged grains stay in.  Non-speech grains add nothing to the
    language sets, so their time is scored as silence.
    """
    grains = [g for g in grains if g.audio_name == audio_name]
    eng_all = normalize(g.span for g in grains if g.language is ENGLISH)
    man_all = normalize(g.span for g in grains if g.language is MANDARIN)
    non_eval = normalize(g.span for g in grains if g.language is NON_EVALUATED)
    removed = non_eval | excluded | collar_zone(eng_all, man_all, collar_ms)
    scored = regions - removed
    clipped = sum(subtract(SpanSet((g.span,)), regions).total_duration for g in grains)
    return ReferenceTimeline(audio_name, eng_all & scored, man_all & scored, removed, scored, clipped)


def build_hypothesis_timeline(
    audio_name: str,
    turns: Iterable[LanguageTurn],
    scored_region: SpanSet,
) -> HypothesisTimeline:
    turns = list(turns)
    eng = normalize((t.start, t.end) for t in turns if t.language is ENGLISH)
    man = normalize((t.start, t.end) for t in turns if t.language is MANDARIN)
    return HypothesisTimeline(audio_name, eng & scored_region, man & scored_region, scored_region)


def score_recording(ref: ReferenceTimeline, hyp: HypothesisTimeline) -> DerBreakdown:
    if ref.scored_region != hyp.scored_region:
        raise TimelineMismatchError(f"{ref.audio_name}: reference and hypothesis scored regions differ")
    out = DerBreakdown(scored_region_ms=ref.scored_region.total_duration)
    pieces = partition({"rE": ref.english, "rM": ref.mandarin, "hE": hyp.english, "hM": hyp.mandarin})
    for piece, labels in pieces:
        d = piece.duration
        r_e, r_m = "rE" in labels, "rM" in labels
        h_e, h_m = "hE" in labels, "hM" in labels
        nr, nh = r_e + r_m, h_e + h_m
        hit = (r_e and h_e) + (r_m and h_m)
        out.correct_ms += d * hit
        out.language_error_ms += d * (min(nr, nh) - hit)
        out.missed_ms += d * max(0, nr - nh)
        out.false_alarm_ms += d * max(0, nh - nr)
        out.ref_speech_ms += d * nr
        out.english_ref_ms += d * r_e
        out.mandarin_ref_ms += d * r_m
        out.english_error_ms += d * (r_e and not h_e)
        out.mandarin_error_ms += d * (r_m and not h_m)
    return out


def brute_force_score(
    grains: Sequence[Grain],
    regions: Sequence[Interval],
    turns: Sequence[LanguageTurn],
    excluded: Sequence[Interval] = (),
    collar_ms: int = 0,
) -> DerBreakdown:
    """Millisecond-grid oracle for :func:`score_recording`.

    Paints every raw interval onto boolean arrays indexed by millisecond and
    counts instants; none of the interval algebra is used.  ``grains`` must
    all belong to one recording.
    """
    ends = [r.end for r in regions] + [g.end for g in grains] + [t.end for t in turns] + [e.end for e in excluded]
    n = max(ends, default=0) + collar_ms + 1
    in_regions = sum(r.end - r.start for r in regions)
    if in_regions > ORACLE_LIMIT_MS or n > 4 * ORACLE_LIMIT_MS:
        raise ValueError(f"oracle refuses {in_regions} ms of scored time (limit {ORACLE_LIMIT_MS})")

    def paint(spans) -> np.ndarray:
        a = np.zeros(n, dtype=bool)
        for s in spans:
            a[s.start:s.end] = True
        return a

    region = paint(regions)
    r_e = paint(g for g in grains if g.language is ENGLISH)
    r_m = paint(g for g in grains if g.language is MANDARIN)
    scored = region & ~paint(g for g in grains if g.language is NON_EVALUATED) & ~paint(excluded)
    if collar_ms > 0:
        # a boundary sits at t where membership differs between t-1 and t
        for lang in (r_e, r_m):
            prev = np.concatenate([[False], lang[:-1]])
            for t in np.flatnonzero(lang != prev):
                scored[max(0, t - collar_ms):t + collar_ms] = False
    r_e &= scored
    r_m &= scored
    h_e = paint(t for t in turns if t.language is ENGLISH) & scored
    h_m = paint(t for t in turns if t.language is MANDARIN) & scored

    nr = r_e.astype(np.int64) + r_m
    nh = h_e.astype(np.int64) + h_m
    hit = (r_e & h_e).astype(np.int64) + (r_m & h_m)
    return DerBreakdown(
        correct_ms=int(hit.sum()),
        language_error_ms=int((np.minimum(nr, nh) - hit).sum()),
        missed_ms=int(np.maximum(0, nr - nh).sum()),
        false_alarm_ms=int(np.maximum(0, nh - nr).sum()),
        ref_speech_ms=int(nr.sum()),
        scored_region_ms=int(scored.sum()),
        english_ref_ms=int(r_e.sum()),
        mandarin_ref_ms=int(r_m.sum()),
        english_error_ms=int((r_e & ~h_e).sum()),
        mandarin_error_ms=int((r_m & ~h_m).sum()),
    )


@dataclass
class DerResult:
    denominator: str
    denominator_ms: int
    der: float
    language_error_rate: float
    false_alarm_rate: float
    missed_rate: float
    english_error_rate: float
    mandarin_error_rate: float
    english_error_rate_own: float | None
    mandarin_error_rate_own: float | None
    totals: DerBreakdown
    per_recording: dict[str, DerBreakdown] = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["denominators"] = {
            REF_SPEECH: self.totals.ref_speech_ms,
            SCORED_REGION: self.totals.scored_region_ms,
        }
        return d


def aggregate(breakdowns: Mapping[str, DerBreakdown] | Sequence[DerBreakdown], denominator: str = REF_SPEECH) -> DerResult:
    """Sum millisecond tallies over recordings, then divide once.

    ``english_error_rate`` / ``mandarin_error_rate`` share the DER denominator;
    the ``_own`` variants divide by that language's reference time instead.
    """
    if isinstance(breakdowns, Mapping):
        per = {k: breakdowns[k] for k in sorted(breakdowns)}
        items = list(per.values())
    else:
        per = {}
        items = list(breakdowns)
    if not items:
        raise UndefinedMetricError("nothing to aggregate")
    total = sum(items, DerBreakdown())
    if denominator == REF_SPEECH:
        denom = total.ref_speech_ms
    elif denominator == SCORED_REGION:
        denom = total.scored_region_ms
    else:
        raise ValueError(f"unknown denominator {denominator!r}")
    if denom == 0:
        raise UndefinedMetricError(f"{denominator} denominator is zero")
    errors = total.language_error_ms + total.missed_ms + total.false_alarm_ms
    return DerResult(
        denominator=denominator,
        denominator_ms=denom,
        der=errors / denom,
        language_error_rate=total.language_error_ms / denom,
        false_alarm_rate=total.false_alarm_ms / denom,
        missed_rate=total.missed_ms / denom,
        english_error_rate=total.english_error_ms / denom,
        mandarin_error_rate=total.mandarin_error_ms / denom,
        english_error_rate_own=total.english_error_ms / total.english_ref_ms if total.english_ref_ms else None,
        mandarin_error_rate_own=total.mandarin_error_ms / total.mandarin_ref_ms if total.mandarin_ref_ms else None,
        totals=total,
        per_recording=per,
    )


def score_corpus(
    grains: Sequence[Grain],
    regions: Mapping[str, SpanSet],
    hypotheses: Mapping[str, Sequence[LanguageTurn]],
    excluded: Mapping[str, SpanSet] | None = None,
    collar_ms: int = 0,
    map_fn=map,
) -> dict[str, DerBreakdown]:
    """Score every recording that has evaluated regions.

    ``hypotheses`` is keyed by recording stem or full name; a missing entry
    counts as an empty hypothesis.  ``map_fn`` lets callers parallelise.
    """
    by_rec = group_by_recording(grains)
    excluded = excluded or {}

    def one(audio: str) -> tuple[str, DerBreakdown]:
        ref = build_reference_timeline(audio, by_rec.get(audio, []), regions[audio],
                                       excluded.get(audio, EMPTY), collar_ms)
        turns = hypotheses.get(audio, hypotheses.get(recording_stem(audio), []))
        hyp = build_hypothesis_timeline(audio, turns, ref.scored_region)
        return audio, score_recording(ref, hyp)

    return dict(map_fn(one, sorted(regions)))
