"""Reference annotation model and the challenge CSV layouts.

Reference CSV: one header row, then
``audio_name, utt_id, start_ms, end_ms, language_tag, overlap_diff_lang``.

Evaluated-regions CSV: no header, ``audio_name, start_ms, end_ms``.

Raw-token CSV (tool-defined, one header row):
``audio_name, speaker, utt_id, token_index, start_ms, end_ms, raw_label``.
"""

from __future__ import annotations

import csv
import enum
import io
import os
from collections import defaultdict
from dataclasses import dataclass, replace
from typing import Iterable, Mapping

from .timeline import Interval, SpanSet, intersect, normalize


class AnnotationError(ValueError):
    def __init__(self, message: str, row: int | None = None):
        self.row = row
        super().__init__(f"row {row}: {message}" if row is not None else message)


class LanguageLabel(str, enum.Enum):
    ENGLISH = "English"
    MANDARIN = "Mandarin"
    NON_EVALUATED = "Non-Evaluated-Speech"
    NON_SPEECH = "Non-Speech"

    def __str__(self):
        return self.value

    @property
    def is_target(self) -> bool:
        return self in TARGETS

    def other(self) -> "LanguageLabel":
        if self is LanguageLabel.ENGLISH:
            return LanguageLabel.MANDARIN
        if self is LanguageLabel.MANDARIN:
            return LanguageLabel.ENGLISH
        raise ValueError(f"{self} has no counterpart target language")


ENGLISH = LanguageLabel.ENGLISH
MANDARIN = LanguageLabel.MANDARIN
NON_EVALUATED = LanguageLabel.NON_EVALUATED
NON_SPEECH = LanguageLabel.NON_SPEECH
TARGETS = (ENGLISH, MANDARIN)


class RawLabel(str, enum.Enum):
    ENGLISH = "English"
    MANDARIN = "Mandarin"
    LANGUAGELESS = "Languageless"
    RED_DOT_DISCOURSE = "RedDotDiscourse"
    RED_DOT_VOCAB = "RedDotVocab"
    NON_EVALUATED = "NonEvaluatedSpeech"
    NON_SPEECH = "NonSpeech"
    REDACTED = "Redacted"

    def __str__(self):
        return self.value


_RAW_ALIASES = {
    "non-evaluated-speech": RawLabel.NON_EVALUATED,
    "non-speech": RawLabel.NON_SPEECH,
    "red-dot-discourse": RawLabel.RED_DOT_DISCOURSE,
    "red-dot-vocab": RawLabel.RED_DOT_VOCAB,
}


def parse_raw_label(text: str) -> RawLabel:
    try:
        return RawLabel(text)
    except ValueError:
        pass
    try:
        return _RAW_ALIASES[text.lower()]
    except KeyError:
        raise ValueError(f"unknown raw label {text!r}") from None


@dataclass(frozen=True)
class Grain:
    audio_name: str
    utt_id: str
    start: int
    end: int
    language: LanguageLabel
    overlap_diff_lang: bool = False

    def __post_init__(self):
        if self.start < 0 or self.end <= self.start:
            raise AnnotationError(f"bad grain span [{self.start}, {self.end})")

    @property
    def span(self) -> Interval:
        return Interval(self.start, self.end)

    @property
    def duration(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class RawToken:
    token_index: int
    start: int
    end: int
    raw_label: RawLabel

    @property
    def span(self) -> Interval:
        return Interval(self.start, self.end)

    @property
    def duration(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class Utterance:
    audio_name: str
    speaker: str
    utt_id: str
    tokens: tuple[RawToken, ...]

    @property
    def span(self) -> Interval:
        return Interval(self.tokens[0].start, self.tokens[-1].end)


def recording_stem(audio_name: str) -> str:
    """``"TTS_x.wav"`` -> ``"TTS_x"``; names without an extension pass through."""
    return os.path.splitext(audio_name)[0]


def _reader(text: str) -> list[list[str]]:
    text = text.lstrip("﻿")
    first = text.split("\n", 1)[0]
    delimiter = "\t" if "\t" in first and "," not in first else ","
    rows = csv.reader(io.StringIO(text), delimiter=delimiter, skipinitialspace=True)
    return [[c.strip() for c in row] for row in rows]


def _int_field(value: str, what: str, row: int) -> int:
    v = value.strip()
    if not v or not (v.isdigit() or (v[0] == "-" and v[1:].isdigit())):
        raise AnnotationError(f"{what} {value!r} is not an integer millisecond value", row)
    return int(v)


_LANG_TAGS = {label.value: label for label in LanguageLabel}
_FLAGS = {"true": True, "false": False}


def parse_reference_csv(text: str) -> list[Grain]:
    """Parse a reference annotation CSV into grains, in file order.

    The header row is skipped by position.  Row numbers in errors are 1-based
    file rows, so the first data row is row 2.
    """
    grains = []
    seen: dict[tuple[str, str], int] = {}
    rows = _reader(text)
    for n, row in enumerate(rows[1:], start=2):
        if not row or all(not c for c in row):
            continue
        if len(row) != 6:
            raise AnnotationError(f"expected 6 columns, got {len(row)}", n)
        audio, utt, start_s, end_s, tag, flag = row
        if not audio or not utt:
            raise AnnotationError("empty audio name or utt_id", n)
        start = _int_field(start_s, "start", n)
        end = _int_field(end_s, "end", n)
        if start < 0:
            raise AnnotationError("negative start time", n)
        if end <= start:
            raise AnnotationError(f"end {end} is not after start {start}", n)
        if tag not in _LANG_TAGS:
            raise AnnotationError(f"unknown language tag {tag!r}", n)
        if flag.lower() not in _FLAGS:
            raise AnnotationError(f"overlap flag must be True or False, got {flag!r}", n)
        key = (audio, utt)
        if key in seen:
            raise AnnotationError(f"duplicate utt_id {utt!r} for {audio} (first on row {seen[key]})", n)
        seen[key] = n
        grains.append(Grain(audio, utt, start, end, _LANG_TAGS[tag], _FLAGS[flag.lower()]))
    return grains


def write_reference_csv(grains: Iterable[Grain]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["audio_name", "utt_id", "start", "end", "language", "overlap_diff_lang"])
    for g in grains:
        w.writerow([g.audio_name, g.utt_id, g.start, g.end, g.language.value, str(g.overlap_diff_lang)])
    return buf.getvalue()


def group_by_recording(grains: Iterable[Grain]) -> dict[str, list[Grain]]:
    out: dict[str, list[Grain]] = defaultdict(list)
    for g in grains:
        out[g.audio_name].append(g)
    return dict(out)


def parse_evaluated_regions(text: str) -> dict[str, SpanSet]:
    """Parse the 3-column evaluated-regions CSV into one span set per recording."""
    raw: dict[str, list[tuple[int, Interval]]] = defaultdict(list)
    for n, row in enumerate(_reader(text), start=1):
        if not row or all(not c for c in row):
            continue
        if len(row) != 3:
            raise AnnotationError(f"expected 3 columns, got {len(row)}", n)
        audio = row[0]
        start = _int_field(row[1], "start", n)
        end = _int_field(row[2], "end", n)
        if start < 0 or end <= start:
            raise AnnotationError(f"bad region [{start}, {end})", n)
        span = Interval(start, end)
        for other_row, other in raw[audio]:
            if span.start < other.end and other.start < span.end:
                raise AnnotationError(f"region overlaps row {other_row} for {audio}", n)
        raw[audio].append((n, span))
    return {audio: normalize(s for _, s in spans) for audio, spans in raw.items()}


def write_evaluated_regions(regions: Mapping[str, SpanSet]) -> str:
    lines = []
    for audio, spans in regions.items():
        for s in spans:
            lines.append(f"{audio},{s.start},{s.end}\n")
    return "".join(lines)


# Excluded spans (redactions) share the regions layout, plus an optional label column.
def parse_excluded_spans(text: str) -> dict[str, SpanSet]:
    raw: dict[str, list[Interval]] = defaultdict(list)
    for n, row in enumerate(_reader(text), start=1):
        if not row or all(not c for c in row):
            continue
        if len(row) not in (3, 4):
            raise AnnotationError(f"expected 3 or 4 columns, got {len(row)}", n)
        start = _int_field(row[1], "start", n)
        end = _int_field(row[2], "end", n)
        if start < 0 or end <= start:
            raise AnnotationError(f"bad excluded span [{start}, {end})", n)
        raw[row[0]].append(Interval(start, end))
    return {audio: normalize(spans) for audio, spans in raw.items()}


def parse_raw_tokens(text: str) -> list[Utterance]:
    """Parse the raw-token CSV into utterances keyed by (audio, speaker, utt_id).

    Tokens are ordered by ``token_index``; they must not overlap.
    """
    groups: dict[tuple[str, str, str], list[tuple[int, RawToken]]] = {}
    rows = _reader(text)
    for n, row in enumerate(rows[1:], start=2):
        if not row or all(not c for c in row):
            continue
        if len(row) != 7:
            raise AnnotationError(f"expected 7 columns, got {len(row)}", n)
        audio, speaker, utt, idx_s, start_s, end_s, label_s = row
        idx = _int_field(idx_s, "token_index", n)
        start = _int_field(start_s, "start", n)
        end = _int_field(end_s, "end", n)
        if start < 0 or end <= start:
            raise AnnotationError(f"bad token span [{start}, {end})", n)
        try:
            label = parse_raw_label(label_s)
        except ValueError as e:
            raise AnnotationError(str(e), n) from None
        groups.setdefault((audio, speaker, utt), []).append((n, RawToken(idx, start, end, label)))

    utterances = []
    for (audio, speaker, utt), items in groups.items():
        items.sort(key=lambda it: it[1].token_index)
        for (_, a), (n, b) in zip(items, items[1:]):
            if a.token_index == b.token_index:
                raise AnnotationError(f"duplicate token_index {b.token_index} in {audio}/{utt}", n)
            if b.start < a.end:
                raise AnnotationError(f"token {b.token_index} overlaps or precedes token {a.token_index} in {audio}/{utt}", n)
        utterances.append(Utterance(audio, speaker, utt, tuple(t for _, t in items)))
    return utterances


def write_raw_tokens(utterances: Iterable[Utterance]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["audio_name", "speaker", "utt_id", "token_index", "start", "end", "raw_label"])
    for u in utterances:
        for t in u.tokens:
            w.writerow([u.audio_name, u.speaker, u.utt_id, t.token_index, t.start, t.end, t.raw_label.value])
    return buf.getvalue()


def compute_overlap_flags(grains: Iterable[Grain]) -> list[Grain]:
    """Set ``overlap_diff_lang`` on grains of one or more recordings.

    A grain is flagged iff it shares a nonzero stretch of time with a grain of
    the other target language in the same recording.  Input order is kept.
    """
    grains = list(grains)
    unions: dict[tuple[str, LanguageLabel], SpanSet] = {}
    for audio, group in group_by_recording(grains).items():
        for lang in TARGETS:
            unions[audio, lang] = normalize(g.span for g in group if g.language is lang)
    out = []
    for g in grains:
        flag = False
        if g.language.is_target:
            other = unions[g.audio_name, g.language.other()]
            flag = bool(intersect(SpanSet((g.span,)), other))
        out.append(replace(g, overlap_diff_lang=flag))
    return out


def eligible_grains(grains: Iterable[Grain]) -> list[Grain]:
    """Grains scored for language identification: English/Mandarin, not overlap-flagged."""
    return [g for g in grains if g.language.is_target and not g.overlap_diff_lang]
