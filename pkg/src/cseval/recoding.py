"""Recode raw annotation tokens into challenge-ready language grains.

Raw annotations carry two extra vocabulary classes, Languageless fillers and
Red-Dot words, plus redacted (PII) spans.  They are folded into English or
Mandarin by position inside the utterance:

1. a Red-Dot discourse marker takes the language of the nearest preceding
   English/Mandarin token;
2. any other Languageless/Red-Dot token takes the language of its neighbours:
   the following segment when it opens the utterance, the preceding one when
   it closes it, the shared language when both neighbours agree, and the
   utterance's dominant language when they differ;
3. an utterance with no English/Mandarin token at all takes the speaker's main
   language in that file;
4. a redacted token is labelled like rule 2 and removed from scoring; a fully
   redacted utterance becomes Non-Speech.

"Dominant" means the larger total English vs Mandarin token duration in the
utterance.  Exact ties resolve to English and are reported in ``notes``.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

from .annotations import (
    ENGLISH,
    MANDARIN,
    NON_EVALUATED,
    NON_SPEECH,
    TARGETS,
    Grain,
    LanguageLabel,
    RawLabel,
    RawToken,
    Utterance,
    compute_overlap_flags,
)
from .timeline import Interval


class RecodeError(ValueError):
    pass


_DIRECT = {
    RawLabel.ENGLISH: ENGLISH,
    RawLabel.MANDARIN: MANDARIN,
    RawLabel.NON_SPEECH: NON_SPEECH,
    RawLabel.NON_EVALUATED: NON_EVALUATED,
}
_FLEXIBLE = {RawLabel.LANGUAGELESS, RawLabel.RED_DOT_VOCAB, RawLabel.RED_DOT_DISCOURSE}


@dataclass
class RecodedUtterance:
    grains: list[tuple[Interval, LanguageLabel]]
    # redacted spans that kept a language label; removed from scoring
    excluded: list[tuple[Interval, LanguageLabel]] = field(default_factory=list)


def _tie_break(eng: int, man: int, what: str, notes: list | None) -> LanguageLabel:
    if eng == man and notes is not None:
        notes.append(f"{what}: English/Mandarin duration tie ({eng} ms), resolved to English")
    return ENGLISH if eng >= man else MANDARIN


def speaker_main_language(utterances: Iterable[Utterance], notes: list | None = None) -> LanguageLabel:
    """Target language with the larger total token duration for one speaker in one file."""
    totals = {ENGLISH: 0, MANDARIN: 0}
    who = None
    for u in utterances:
        who = who or f"{u.audio_name}/{u.speaker}"
        for t in u.tokens:
            lang = _DIRECT.get(t.raw_label)
            if lang in totals:
                totals[lang] += t.duration
    if not totals[ENGLISH] and not totals[MANDARIN]:
        raise RecodeError(f"cannot determine main language for {who}: no English or Mandarin tokens")
    return _tie_break(totals[ENGLISH], totals[MANDARIN], f"main language of {who}", notes)


def _check_order(tokens: tuple[RawToken, ...], where: str):
    for a, b in zip(tokens, tokens[1:]):
        if b.start < a.end:
            raise RecodeError(f"{where}: tokens out of order or overlapping at index {b.token_index}")


def _neighbours(labels: list, i: int) -> tuple:
    prev = next((labels[j] for j in range(i - 1, -1, -1) if labels[j] in TARGETS), None)
    nxt = next((labels[j] for j in range(i + 1, len(labels)) if labels[j] in TARGETS), None)
    return prev, nxt


def recode_utterance(
    u: Utterance,
    main_language: LanguageLabel | None = None,
    notes: list | None = None,
) -> RecodedUtterance:
    tokens = u.tokens
    where = f"{u.audio_name}/{u.utt_id}"
    if not tokens:
        raise RecodeError(f"{where}: utterance has no tokens")
    _check_order(tokens, where)

    if all(t.raw_label is RawLabel.REDACTED for t in tokens):
        return RecodedUtterance(_merge([(t.span, NON_SPEECH) for t in tokens]))

    original = [_DIRECT.get(t.raw_label) for t in tokens]
    eng = sum(t.duration for t, lab in zip(tokens, original) if lab is ENGLISH)
    man = sum(t.duration for t, lab in zip(tokens, original) if lab is MANDARIN)
    dominant_cache = []

    def dominant():
        if not dominant_cache:
            dominant_cache.append(_tie_break(eng, man, f"dominant language of {where}", notes))
        return dominant_cache[0]

    # rule 1
    labels = list(original)
    for i, t in enumerate(tokens):
        if t.raw_label is RawLabel.RED_DOT_DISCOURSE:
            prev = next((original[j] for j in range(i - 1, -1, -1) if original[j] in TARGETS), None)
            if prev is not None:
                labels[i] = prev

    # rules 2 and 3, against the state after rule 1
    after_rule1 = list(labels)
    for i, t in enumerate(tokens):
        if t.raw_label not in _FLEXIBLE or labels[i] is not None:
            continue
        prev, nxt = _neighbours(after_rule1, i)
        if prev is None and nxt is None:
            if main_language is None:
                raise RecodeError(f"{where}: no target-language token and no main language supplied")
            labels[i] = main_language
        elif prev is None or nxt is None:
            labels[i] = prev or nxt
        elif prev is nxt:
            labels[i] = prev
        else:
            labels[i] = dominant()

    # rule 4, against the state after rules 1-3
    after_rule3 = list(labels)
    excluded = []
    kept = []
    for i, t in enumerate(tokens):
        if t.raw_label is not RawLabel.REDACTED:
            kept.append((t.span, labels[i]))
            continue
        prev, nxt = _neighbours(after_rule3, i)
        if prev is None and nxt is None:
            kept.append((t.span, NON_SPEECH))
        elif prev is None or nxt is None or prev is nxt:
            excluded.append((t.span, prev or nxt))
        else:
            excluded.append((t.span, dominant()))
    return RecodedUtterance(_merge(kept), _merge(excluded))


def _merge(items: list[tuple[Interval, LanguageLabel]]) -> list[tuple[Interval, LanguageLabel]]:
    out: list[tuple[Interval, LanguageLabel]] = []
    for span, lab in items:
        if out and out[-1][1] is lab and out[-1][0].end == span.start:
            out[-1] = (Interval(out[-1][0].start, span.end), lab)
        else:
            out.append((span, lab))
    return out


@dataclass
class RecodeResult:
    grains: list[Grain]
    excluded: dict[str, list[tuple[Interval, LanguageLabel]]]
    notes: list[str]


def recode_corpus(utterances: Iterable[Utterance]) -> RecodeResult:
    """Recode every utterance, renumber grains per recording and flag overlaps.

    Grains are ordered by (audio, start, end) and get utt ids ``a1, a2, ...``
    in that order, so ids never contain underscores.
    """
    utterances = list(utterances)
    by_speaker: dict[tuple[str, str], list[Utterance]] = defaultdict(list)
    for u in utterances:
        by_speaker[u.audio_name, u.speaker].append(u)
    notes: list[str] = []
    main_cache: dict[tuple[str, str], LanguageLabel] = {}

    rows = []
    excluded: dict[str, list] = defaultdict(list)
    for u in utterances:
        needs_main = not any(t.raw_label in (RawLabel.ENGLISH, RawLabel.MANDARIN) for t in u.tokens)
        main = None
        if needs_main and any(t.raw_label in _FLEXIBLE for t in u.tokens):
            key = (u.audio_name, u.speaker)
            if key not in main_cache:
                main_cache[key] = speaker_main_language(by_speaker[key], notes)
            main = main_cache[key]
        rec = recode_utterance(u, main, notes)
        for span, lab in rec.grains:
            rows.append((u.audio_name, span.start, span.end, lab.value, u.speaker, u.utt_id, lab))
        excluded[u.audio_name].extend(rec.excluded)

    rows.sort(key=lambda r: r[:6])
    grains = []
    counter: dict[str, int] = defaultdict(int)
    for audio, start, end, _, _, _, lab in rows:
        counter[audio] += 1
        grains.append(Grain(audio, f"a{counter[audio]}", start, end, lab))
    for spans in excluded.values():
        spans.sort(key=lambda x: (x[0].start, x[0].end))
    return RecodeResult(compute_overlap_flags(grains), {a: s for a, s in excluded.items() if s}, notes)


def write_excluded_csv(excluded: dict[str, list[tuple[Interval, LanguageLabel]]]) -> str:
    lines = []
    for audio in sorted(excluded):
        for span, lab in excluded[audio]:
            lines.append(f"{audio},{span.start},{span.end},{lab.value}\n")
    return "".join(lines)
