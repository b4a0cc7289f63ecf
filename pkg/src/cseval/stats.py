"""Corpus summary statistics and plot-ready histogram data."""

from __future__ import annotations

import csv
import io
import statistics
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping

from .annotations import ENGLISH, MANDARIN, NON_EVALUATED, Grain, LanguageLabel
from .timeline import SpanSet


def format_hms(ms: int) -> str:
    s = round(ms / 1000)
    return f"{s // 3600:02d}:{s % 3600 // 60:02d}:{s % 60:02d}"


@dataclass
class LanguageStats:
    segments: int
    total_ms: int
    total_hms: str
    median_ms: float | None
    mean_ms: float | None


@dataclass
class RecordingStats:
    audio_name: str
    english_ms: int
    mandarin_ms: int
    non_evaluated_ms: int
    mandarin_proportion: float | None
    region_ms: int | None = None


@dataclass
class CorpusStats:
    recordings: int
    recordings_one_language: int
    recordings_multi_language: int
    recordings_no_target_language: int
    english: LanguageStats
    mandarin: LanguageStats
    non_evaluated_ms: int
    non_evaluated_hms: str
    mean_mandarin_proportion: float | None
    total_region_ms: int | None
    total_region_hms: str | None
    per_recording: list[RecordingStats] = field(default_factory=list)
    grain_lengths: dict[str, list[int]] = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("grain_lengths")
        return d


def _lang_stats(lengths: list[int]) -> LanguageStats:
    total = sum(lengths)
    return LanguageStats(
        segments=len(lengths),
        total_ms=total,
        total_hms=format_hms(total),
        median_ms=statistics.median(lengths) if lengths else None,
        mean_ms=total / len(lengths) if lengths else None,
    )


def corpus_stats(grains: Iterable[Grain], regions: Mapping[str, SpanSet] | None = None) -> CorpusStats:
    """Summarise a parsed reference set.

    Durations are plain sums of grain lengths, so overlapping grains of the
    same language are counted twice.  The Mandarin proportion of a recording
    is Mandarin ms / (English ms + Mandarin ms).
    """
    lengths: dict[LanguageLabel, list[int]] = {ENGLISH: [], MANDARIN: [], NON_EVALUATED: []}
    per_file: dict[str, dict[LanguageLabel, int]] = defaultdict(lambda: defaultdict(int))
    for g in grains:
        per_file[g.audio_name][g.language] += g.duration
        if g.language in lengths:
            lengths[g.language].append(g.duration)
    names = set(per_file) | set(regions or ())

    rows = []
    one = multi = none = 0
    for audio in sorted(names):
        e = per_file[audio][ENGLISH]
        m = per_file[audio][MANDARIN]
        present = (e > 0) + (m > 0)
        one += present == 1
        multi += present == 2
        none += present == 0
        rows.append(RecordingStats(
            audio_name=audio,
            english_ms=e,
            mandarin_ms=m,
            non_evaluated_ms=per_file[audio][NON_EVALUATED],
            mandarin_proportion=m / (e + m) if e + m else None,
            region_ms=regions[audio].total_duration if regions and audio in regions else None,
        ))
    props = [r.mandarin_proportion for r in rows if r.mandarin_proportion is not None]
    region_total = sum(s.total_duration for s in regions.values()) if regions else None
    nonev = sum(lengths[NON_EVALUATED])
    return CorpusStats(
        recordings=len(names),
        recordings_one_language=one,
        recordings_multi_language=multi,
        recordings_no_target_language=none,
        english=_lang_stats(lengths[ENGLISH]),
        mandarin=_lang_stats(lengths[MANDARIN]),
        non_evaluated_ms=nonev,
        non_evaluated_hms=format_hms(nonev),
        mean_mandarin_proportion=statistics.fmean(props) if props else None,
        total_region_ms=region_total,
        total_region_hms=format_hms(region_total) if region_total is not None else None,
        per_recording=rows,
        grain_lengths={"English": lengths[ENGLISH], "Mandarin": lengths[MANDARIN]},
    )


def length_histogram(lengths: Iterable[int], bin_ms: int) -> list[tuple[int, int, int]]:
    """``(bin_start, bin_end, count)`` rows covering every bin up to the longest grain."""
    counts: dict[int, int] = defaultdict(int)
    for n in lengths:
        counts[n // bin_ms] += 1
    if not counts:
        return []
    return [(b * bin_ms, (b + 1) * bin_ms, counts.get(b, 0)) for b in range(max(counts) + 1)]


def histogram_csv(stats: CorpusStats, bin_ms: int = 100) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["series", "language", "bin_start_ms", "bin_end_ms", "count"])
    for lang, lengths in stats.grain_lengths.items():
        for lo, hi, n in length_histogram(lengths, bin_ms):
            w.writerow(["grain_length", lang, lo, hi, n])
    per_file = {
        "English": [r.english_ms for r in stats.per_recording],
        "Mandarin": [r.mandarin_ms for r in stats.per_recording],
    }
    file_bin = bin_ms * 100
    for lang, totals in per_file.items():
        for lo, hi, n in length_histogram(totals, file_bin):
            w.writerow(["file_total", lang, lo, hi, n])
    return buf.getvalue()
