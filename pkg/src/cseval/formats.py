"""Codecs for submission files.

* segment ids: ``<audio stem>_<utt_id>_<start>_<end>``
* ``prediction.txt`` for language identification, in the two-line layout
  (``id 0 score`` / ``id 1 score``) or the one-line layout
  (``id english_score mandarin_score``)
* per-recording language-turn files: ``start end language`` per line
* ``results.zip`` archives holding either of the above
"""

from __future__ import annotations

import logging
import math
import os
import zipfile
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal, InvalidOperation
from typing import Sequence

from .annotations import ENGLISH, MANDARIN, Grain, LanguageLabel, recording_stem

log = logging.getLogger(__name__)

TWO_LINE = "two-line"
ONE_LINE = "one-line"
AUTO = "auto"


class FormatError(ValueError):
    def __init__(self, message: str, line: int | None = None, rule: str = "malformed-line"):
        self.line = line
        self.rule = rule
        super().__init__(f"line {line}: {message}" if line is not None else message)


class SubmissionError(ValueError):
    def __init__(self, message: str, rule: str):
        self.rule = rule
        super().__init__(message)


def _parse_ms(text: str) -> int | None:
    if not (text.isascii() and text.isdigit()):
        return None
    return int(text)


@dataclass(frozen=True)
class SegmentId:
    audio_name: str
    utt_id: str
    start: int
    end: int

    def __str__(self):
        return render_segment_id(self)

    @classmethod
    def from_grain(cls, g: Grain) -> "SegmentId":
        return cls(recording_stem(g.audio_name), g.utt_id, g.start, g.end)


def render_segment_id(sid: SegmentId) -> str:
    if not sid.utt_id or "_" in sid.utt_id:
        raise FormatError(f"utt_id {sid.utt_id!r} must be non-empty and contain no underscore")
    if not sid.audio_name:
        raise FormatError("empty audio name")
    for v in (sid.start, sid.end):
        if not isinstance(v, int) or v < 0:
            raise FormatError(f"segment times must be non-negative integers, got {v!r}")
    return f"{sid.audio_name}_{sid.utt_id}_{sid.start}_{sid.end}"


def parse_segment_id(s: str) -> SegmentId:
    parts = s.rsplit("_", 3)
    if len(parts) != 4 or not parts[0] or not parts[1]:
        raise FormatError(f"segment id {s!r} needs audio, utt_id, start and end fields", rule="bad-segment-id")
    audio, utt, start_s, end_s = parts
    start, end = _parse_ms(start_s), _parse_ms(end_s)
    if start is None or end is None:
        raise FormatError(f"segment id {s!r} has non-integer times", rule="bad-segment-id")
    if end <= start:
        raise FormatError(f"segment id {s!r} ends before it starts", rule="bad-segment-id")
    return SegmentId(audio, utt, start, end)


@dataclass(frozen=True)
class ScoredSegment:
    id: SegmentId
    score_english: float
    score_mandarin: float


@dataclass
class PredictionScan:
    """Everything readable from a prediction file, problems included.

    ``entries`` holds ``(line_no, raw_id, ScoredSegment | None)`` in file
    order; the segment is ``None`` when the line(s) were unusable but the id
    could still be read.
    """

    format: str
    entries: list[tuple[int, str, ScoredSegment | None]] = field(default_factory=list)
    issues: list[FormatError] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)


def _score(text: str, line: int, issues: list) -> float | None:
    try:
        v = float(text)
    except ValueError:
        issues.append(FormatError(f"score {text!r} is not a number", line))
        return None
    if not math.isfinite(v):
        issues.append(FormatError(f"score {text!r} is not finite", line, "non-finite-score"))
        return None
    return v


def _segment(raw: str, line: int, issues: list) -> SegmentId | None:
    try:
        return parse_segment_id(raw)
    except FormatError as e:
        issues.append(FormatError(str(e), line, e.rule))
        return None


def detect_prediction_format(lines: Sequence[tuple[int, list[str]]]) -> str:
    """Two-line if consecutive lines ever share an id, otherwise one-line."""
    ids = [f[0] for _, f in lines]
    if any(a == b for a, b in zip(ids, ids[1:])):
        return TWO_LINE
    return ONE_LINE if ids else TWO_LINE


def scan_predictions(text: str, fmt: str = AUTO) -> PredictionScan:
    lines = []
    issues: list[FormatError] = []
    for n, raw in enumerate(text.splitlines(), start=1):
        fields = raw.split()
        if not fields:
            continue
        if len(fields) != 3:
            issues.append(FormatError(f"expected 3 fields, got {len(fields)}", n))
            if fields:
                lines.append((n, fields + [""] * (3 - len(fields))))
            continue
        lines.append((n, fields))

    notes = []
    if fmt == AUTO:
        fmt = detect_prediction_format([(n, f) for n, f in lines if len(f) == 3])
        if not lines:
            notes.append("prediction format ambiguous (empty file); assumed two-line")
        else:
            notes.append(f"prediction format auto-detected as {fmt}")
        log.info(notes[-1])
    elif fmt not in (TWO_LINE, ONE_LINE):
        raise ValueError(f"unknown prediction format {fmt!r}")

    scan = PredictionScan(fmt, issues=issues, notes=notes)
    bad_lines = {e.line for e in issues}
    if fmt == ONE_LINE:
        for n, f in lines:
            sid = _segment(f[0], n, issues)
            if n in bad_lines or sid is None:
                scan.entries.append((n, f[0], None))
                continue
            e = _score(f[1], n, issues)
            m = _score(f[2], n, issues)
            seg = ScoredSegment(sid, e, m) if e is not None and m is not None else None
            scan.entries.append((n, f[0], seg))
        return scan

    i = 0
    while i < len(lines):
        n, f = lines[i]
        if i + 1 < len(lines) and lines[i + 1][1][0] == f[0]:
            n2, f2 = lines[i + 1]
            i += 2
            sid = _segment(f[0], n, issues)
            if n in bad_lines or n2 in bad_lines or sid is None:
                scan.entries.append((n, f[0], None))
                continue
            if (f[1], f2[1]) != ("0", "1"):
                issues.append(FormatError(
                    f"English (0) score must precede Mandarin (1) score, got {f[1]!r} then {f2[1]!r} (lines {n}, {n2})",
                    n, "language-order"))
                scan.entries.append((n, f[0], None))
                continue
            e = _score(f[2], n, issues)
            m = _score(f2[2], n2, issues)
            seg = ScoredSegment(sid, e, m) if e is not None and m is not None else None
            scan.entries.append((n, f[0], seg))
        else:
            i += 1
            if n not in bad_lines:
                if f[1] in ("0", "1"):
                    issues.append(FormatError(f"line for {f[0]!r} has no partner line", n, "unpaired-line"))
                else:
                    issues.append(FormatError("one-line entry inside a two-line file", n, "mixed-format"))
            scan.entries.append((n, f[0], None))
    return scan


def parse_predictions(
    text: str,
    expected_ids: Sequence[SegmentId] | None = None,
    fmt: str = AUTO,
    notes: list | None = None,
) -> list[ScoredSegment]:
    """Parse ``prediction.txt`` strictly, raising on the first problem.

    With ``expected_ids``, any id outside that set is an error.  Order is
    not checked here.
    """
    scan = scan_predictions(text, fmt)
    if notes is not None:
        notes.extend(scan.notes)
    if scan.issues:
        raise min(scan.issues, key=lambda e: e.line or 0)
    known = set(expected_ids) if expected_ids is not None else None
    out = []
    for n, raw, seg in scan.entries:
        assert seg is not None
        if known is not None and seg.id not in known:
            raise FormatError(f"unknown segment id {raw!r}", n, "unknown-segment")
        out.append(seg)
    return out


def write_predictions(segments: Sequence[ScoredSegment], fmt: str = ONE_LINE) -> str:
    lines = []
    for s in segments:
        sid = render_segment_id(s.id)
        if fmt == ONE_LINE:
            lines.append(f"{sid} {s.score_english!r} {s.score_mandarin!r}\n")
        elif fmt == TWO_LINE:
            lines.append(f"{sid} 0 {s.score_english!r}\n")
            lines.append(f"{sid} 1 {s.score_mandarin!r}\n")
        else:
            raise ValueError(f"unknown prediction format {fmt!r}")
    return "".join(lines)


@dataclass(frozen=True)
class LanguageTurn:
    start: int
    end: int
    language: LanguageLabel

    def __post_init__(self):
        if self.start < 0 or self.end <= self.start:
            raise FormatError(f"bad turn [{self.start}, {self.end})", rule="bad-interval")
        if self.language not in (ENGLISH, MANDARIN):
            raise FormatError(f"turn language must be English or Mandarin, got {self.language}", rule="unknown-language")


_TURN_LANGS = {"English": ENGLISH, "Mandarin": MANDARIN}


def _round_ms(text: str) -> int | None:
    try:
        d = Decimal(text)
    except InvalidOperation:
        return None
    if not d.is_finite():
        return None
    return int(d.quantize(Decimal(1), rounding=ROUND_HALF_EVEN))


def scan_language_turns(text: str) -> tuple[list[tuple[int, LanguageTurn]], list[FormatError]]:
    turns, issues = [], []
    for n, raw in enumerate(text.splitlines(), start=1):
        fields = raw.split()
        if not fields:
            continue
        if len(fields) != 3:
            issues.append(FormatError(f"expected 3 fields, got {len(fields)}", n))
            continue
        start, end = _round_ms(fields[0]), _round_ms(fields[1])
        if start is None or end is None:
            issues.append(FormatError(f"malformed time in {raw.strip()!r}", n))
            continue
        lang = _TURN_LANGS.get(fields[2])
        if lang is None:
            issues.append(FormatError(f"unknown language id {fields[2]!r}", n, "unknown-language"))
            continue
        if start < 0 or end < 0:
            issues.append(FormatError("negative time", n, "negative-time"))
            continue
        if end <= start:
            issues.append(FormatError(f"end {fields[1]} is not after start {fields[0]}", n, "bad-interval"))
            continue
        turns.append((n, LanguageTurn(start, end, lang)))
    return turns, issues


def parse_language_turns(text: str) -> list[LanguageTurn]:
    """Times are decimal milliseconds rounded half-to-even to integers."""
    turns, issues = scan_language_turns(text)
    if issues:
        raise issues[0]
    return [t for _, t in turns]


def write_language_turns(turns: Sequence[LanguageTurn]) -> str:
    return "".join(f"{t.start}.0 {t.end}.0 {t.language.value}\n" for t in turns)


@dataclass
class Submission:
    source: str
    task: int
    files: dict[str, str]


def _decode(data: bytes, name: str) -> str:
    try:
        return data.decode("utf-8-sig")
    except UnicodeDecodeError:
        raise SubmissionError(f"{name} is not valid UTF-8", "unreadable-entry") from None


def _listing(path: str) -> list[tuple[str, bytes]]:
    if zipfile.is_zipfile(path):
        with zipfile.ZipFile(path) as zf:
            return [(i.filename, zf.read(i)) for i in zf.infolist() if not i.is_dir()]
    out = []
    for root, _, names in os.walk(path):
        for name in sorted(names):
            full = os.path.join(root, name)
            rel = os.path.relpath(full, path).replace(os.sep, "/")
            with open(full, "rb") as fh:
                out.append((rel, fh.read()))
    return sorted(out)


def inspect_submission(path: str, task: int) -> tuple[Submission | None, list[SubmissionError]]:
    """Read a submission, collecting every structural problem.

    Raises ``OSError`` (or ``zipfile.BadZipFile``) only when the input cannot
    be read at all.
    """
    if task not in (1, 2):
        raise ValueError(f"task must be 1 or 2, got {task!r}")
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    issues: list[SubmissionError] = []
    base = os.path.basename(os.path.normpath(path))
    if " " in base:
        issues.append(SubmissionError(f"submission name {base!r} contains spaces", "archive-name-spaces"))

    if os.path.isfile(path) and not zipfile.is_zipfile(path):
        with open(path, "rb") as fh:
            data = fh.read()
        try:
            text = _decode(data, base)
        except SubmissionError as e:
            return None, issues + [e]
        key = "prediction.txt" if task == 1 else recording_stem(base)
        return Submission(path, task, {key: text}), issues

    entries = [(n, d) for n, d in _listing(path) if not n.startswith("__MACOSX/")]
    files: dict[str, str] = {}
    if task == 1:
        root = [(n, d) for n, d in entries if n == "prediction.txt"]
        nested = [n for n, _ in entries if n != "prediction.txt" and n.endswith("/prediction.txt")]
        if nested and not root:
            issues.append(SubmissionError(f"prediction.txt must sit at the archive root, found {nested[0]!r}", "nested-entry"))
        elif not root:
            issues.append(SubmissionError("no prediction.txt in submission", "missing-prediction"))
        extra = [n for n, _ in entries if n != "prediction.txt" and n not in nested]
        for n in extra:
            issues.append(SubmissionError(f"unexpected entry {n!r}", "extra-entry"))
        for n, d in root:
            try:
                files[n] = _decode(d, n)
            except SubmissionError as e:
                issues.append(e)
    else:
        for n, d in entries:
            if "/" in n:
                issues.append(SubmissionError(f"turn file {n!r} must sit at the archive root", "nested-entry"))
                continue
            if not n.endswith(".txt"):
                issues.append(SubmissionError(f"unexpected non-.txt entry {n!r}", "extra-entry"))
                continue
            try:
                files[recording_stem(n)] = _decode(d, n)
            except SubmissionError as e:
                issues.append(e)
    return Submission(path, task, files), issues


def open_submission(archive_path: str, task: int) -> Submission:
    """Open a zip archive, directory, or bare file; raise on any structural problem."""
    sub, issues = inspect_submission(archive_path, task)
    if issues:
        raise issues[0]
    return sub
