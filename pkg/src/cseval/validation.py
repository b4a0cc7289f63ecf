"""Submission validation with machine-readable rule violations.

Rule ids
--------
Structure (both tasks): ``archive-name-spaces``, ``nested-entry``,
``extra-entry``, ``unreadable-entry``; task 1 only: ``missing-prediction``.

Task 1 content: ``malformed-line``, ``mixed-format``, ``unpaired-line``,
``language-order``, ``non-finite-score``, ``bad-segment-id``,
``unknown-segment``, ``duplicate-segment``, ``missing-segment``,
``order-violation``.

Task 2 content: ``missing-recording``, ``extra-recording``,
``malformed-line``, ``bad-interval``, ``unknown-language``,
``negative-time``; warning ``overlapping-turns``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

from .annotations import recording_stem
from .formats import (
    AUTO,
    ScoredSegment,
    SegmentId,
    Submission,
    inspect_submission,
    parse_segment_id,
    scan_language_turns,
    scan_predictions,
    FormatError,
)
from .timeline import normalize

ERROR = "error"
WARNING = "warning"


@dataclass
class Violation:
    rule: str
    severity: str
    location: str
    message: str


@dataclass
class ValidationReport:
    task: int
    violations: list[Violation] = field(default_factory=list)
    counts: dict[str, int] = field(default_factory=dict)
    format: str | None = None
    notes: list[str] = field(default_factory=list)
    # usable parsed content, for scoring after validation
    segments: list[ScoredSegment] = field(default_factory=list, repr=False)
    turns: dict = field(default_factory=dict, repr=False)

    @property
    def valid(self) -> bool:
        return not any(v.severity == ERROR for v in self.violations)

    @property
    def rules(self) -> set[str]:
        return {v.rule for v in self.violations if v.severity == ERROR}

    def add(self, rule: str, location: str, message: str, severity: str = ERROR):
        self.violations.append(Violation(rule, severity, location, message))

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "valid": self.valid,
            "format": self.format,
            "counts": dict(self.counts),
            "violations": [asdict(v) for v in self.violations],
            "notes": list(self.notes),
        }


def _open(submission, task: int, report: ValidationReport) -> Submission | None:
    if isinstance(submission, Submission):
        return submission
    sub, issues = inspect_submission(submission, task)
    for e in issues:
        report.add(e.rule, str(submission), str(e))
    return sub


def validate_task1(
    submission: Submission | str,
    expected_ids: Sequence[SegmentId],
    fmt: str = AUTO,
    text: str | None = None,
) -> ValidationReport:
    """Check a language-identification submission against the expected segment ids.

    ``submission`` is a path (zip, directory, bare file) or an opened
    :class:`Submission`; pass ``text`` instead to validate raw file content.
    I/O failures propagate as exceptions rather than violations.
    """
    report = ValidationReport(task=1)
    if text is None:
        sub = _open(submission, 1, report)
        text = sub.files.get("prediction.txt") if sub else None
    expected = list(expected_ids)
    report.counts = {"expected": len(expected), "found": 0, "missing": 0,
                     "duplicated": 0, "unknown": 0, "out_of_order": 0}
    if text is None:
        return report

    scan = scan_predictions(text, fmt)
    report.format = scan.format
    report.notes.extend(scan.notes)
    for e in scan.issues:
        report.add(e.rule, f"line {e.line}", str(e))

    index = {sid: i for i, sid in enumerate(expected)}
    seen: dict[SegmentId, int] = {}
    ordered: list[tuple[int, int]] = []
    for line, raw, seg in scan.entries:
        try:
            sid = seg.id if seg is not None else parse_segment_id(raw)
        except FormatError:
            continue
        if sid not in index:
            report.counts["unknown"] += 1
            report.add("unknown-segment", f"line {line}", f"segment {raw} is not an expected segment")
            continue
        if sid in seen:
            report.counts["duplicated"] += 1
            report.add("duplicate-segment", f"line {line}", f"segment {raw} already given on line {seen[sid]}")
            continue
        seen[sid] = line
        ordered.append((line, index[sid]))
        if seg is not None:
            report.segments.append(seg)
    report.counts["found"] = len(seen)

    for sid in expected:
        if sid not in seen:
            report.counts["missing"] += 1
            report.add("missing-segment", str(sid), f"no scores for segment {sid}")

    for (l1, i1), (l2, i2) in zip(ordered, ordered[1:]):
        if i2 < i1:
            report.counts["out_of_order"] += 1
            report.add("order-violation", f"lines {l1}, {l2}",
                       f"segment on line {l2} comes before the one on line {l1} in the reference order")
    return report


def validate_task2(
    submission: Submission | str,
    expected_recordings: Iterable[str],
) -> ValidationReport:
    """Check a diarization submission: one well-formed turn file per expected recording."""
    report = ValidationReport(task=2)
    sub = _open(submission, 2, report)
    expected = sorted({recording_stem(r) for r in expected_recordings})
    files = sub.files if sub else {}
    report.counts = {"expected": len(expected), "found": 0, "missing": 0, "extra": 0, "turns": 0}
    for stem in expected:
        if stem not in files:
            report.counts["missing"] += 1
            report.add("missing-recording", stem, f"no turn file for recording {stem}")
    for stem in sorted(files):
        if stem not in expected:
            report.counts["extra"] += 1
            report.add("extra-recording", f"{stem}.txt", f"{stem}.txt matches no expected recording")
            continue
        report.counts["found"] += 1
        turns, issues = scan_language_turns(files[stem])
        for e in issues:
            report.add(e.rule, f"{stem}.txt line {e.line}", str(e))
        report.counts["turns"] += len(turns)
        report.turns[stem] = [t for _, t in turns]
        for lang in sorted({t.language for _, t in turns}, key=lambda x: x.value):
            same = [t for _, t in turns if t.language is lang]
            if normalize((t.start, t.end) for t in same).total_duration < sum(t.end - t.start for t in same):
                report.add("overlapping-turns", f"{stem}.txt",
                           f"{lang.value} turns overlap each other; they are merged for scoring", WARNING)
    return report
