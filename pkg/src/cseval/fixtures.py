"""Seeded synthetic corpora and submissions.

The generator writes raw tokens, the matching challenge-ready reference
grains and a JSON manifest of every grain it created.  The grains are built
directly from the construction (never by running the recoder), so tests can
compare the recoder and the scorers against them.
"""

from __future__ import annotations

import json
import math
import os
import random
import zipfile
from dataclasses import asdict, dataclass, fields

from .annotations import (
    ENGLISH,
    MANDARIN,
    NON_EVALUATED,
    NON_SPEECH,
    Grain,
    LanguageLabel,
    RawLabel,
    RawToken,
    Utterance,
    eligible_grains,
    recording_stem,
    write_evaluated_regions,
    write_raw_tokens,
    write_reference_csv,
)
from .formats import (
    ONE_LINE,
    LanguageTurn,
    ScoredSegment,
    SegmentId,
    write_language_turns,
    write_predictions,
)
from .timeline import SpanSet, normalize


class FixtureConfigError(ValueError):
    pass


@dataclass
class FixtureConfig:
    seed: int = 0
    recordings: int = 5
    grains_per_recording: tuple[int, int] = (10, 60)
    mandarin_proportion: float = 0.25
    one_language_rate: float = 0.2
    english_median_ms: float = 1125.0
    mandarin_median_ms: float = 900.0
    length_sigma: float = 0.55
    min_grain_ms: int = 60
    gap_ms: tuple[int, int] = (0, 1500)
    overlap_injection_rate: float = 0.1
    nonspeech_rate: float = 0.05
    non_evaluated_rate: float = 0.02
    redaction_rate: float = 0.03
    languageless_rate: float = 0.1
    red_dot_rate: float = 0.08
    regions_per_recording: tuple[int, int] = (1, 2)
    region_jitter_ms: int = 300
    max_recording_ms: int | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "FixtureConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise FixtureConfigError(f"unknown fixture config keys: {sorted(unknown)}")
        kw = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
        return cls(**kw)

    def check(self):
        lo, hi = self.grains_per_recording
        if self.recordings < 0 or lo < 1 or hi < lo:
            raise FixtureConfigError("need recordings >= 0 and 1 <= min grains <= max grains")
        rlo, rhi = self.regions_per_recording
        if not 1 <= rlo <= rhi <= 2:
            raise FixtureConfigError("regions_per_recording must lie within 1..2")
        if self.min_grain_ms < 1:
            raise FixtureConfigError("min_grain_ms must be positive")
        if self.max_recording_ms is not None and self.max_recording_ms < 4 * self.min_grain_ms + 2000:
            raise FixtureConfigError("max_recording_ms too short for the minimum grain length")
        for name in ("mandarin_proportion", "one_language_rate", "overlap_injection_rate", "nonspeech_rate",
                     "non_evaluated_rate", "redaction_rate", "languageless_rate", "red_dot_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise FixtureConfigError(f"{name} must be within [0, 1]")


@dataclass
class NoiseConfig:
    label_flip_rate: float = 0.0
    boundary_jitter_ms: int = 0
    deletion_rate: float = 0.0
    insertion_rate: float = 0.0


@dataclass
class Corpus:
    reference_csv: str
    regions_csv: str
    tokens_csv: str
    excluded_csv: str
    manifest: dict

    def grains(self) -> list[Grain]:
        return manifest_grains(self.manifest)

    def regions(self) -> dict[str, SpanSet]:
        return {r["audio_name"]: normalize(tuple(s) for s in r["regions"]) for r in self.manifest["recordings"]}

    def excluded(self) -> dict[str, SpanSet]:
        return {r["audio_name"]: normalize((s, e) for s, e, _ in r["excluded"])
                for r in self.manifest["recordings"] if r["excluded"]}


def manifest_grains(manifest: dict) -> list[Grain]:
    out = []
    for rec in manifest["recordings"]:
        for g in rec["grains"]:
            out.append(Grain(rec["audio_name"], g["utt_id"], g["start"], g["end"],
                             LanguageLabel(g["language"]), g["overlap_diff_lang"]))
    return out


def _audio_name(seed: int, r: int, rng: random.Random) -> str:
    return (f"TTS_P{seed % 100000:05d}{r:03d}TT_VCST_ECxxx_{rng.randint(1, 3):02d}_AO_"
            f"{rng.randint(10**7, 10**8 - 1)}_v001_R{rng.randint(1, 9):03d}_CRR_MERLion-CCS.wav")


class _RecordingBuilder:
    def __init__(self, cfg: FixtureConfig, rng: random.Random, audio: str):
        self.cfg = cfg
        self.rng = rng
        self.audio = audio
        self.utterances: list[Utterance] = []
        # (start, end, label, speaker, utt_id)
        self.truth: list[tuple[int, int, LanguageLabel, str, str]] = []
        self.excluded: list[tuple[int, int, LanguageLabel]] = []
        self.pending_main: list[tuple[Utterance, str]] = []
        r = rng.random()
        if r < cfg.one_language_rate:
            self.p_mandarin = 0.0 if rng.random() < 0.85 else 1.0
        else:
            self.p_mandarin = min(0.9, max(0.02, rng.gauss(cfg.mandarin_proportion, 0.15)))

    def length(self, lang: LanguageLabel) -> int:
        median = self.cfg.english_median_ms if lang is ENGLISH else self.cfg.mandarin_median_ms
        return max(self.cfg.min_grain_ms, int(self.rng.lognormvariate(math.log(median), self.cfg.length_sigma)))

    def split(self, start: int, end: int) -> list[tuple[int, int]]:
        n = max(1, min(6, round((end - start) / 300)))
        n = min(n, end - start)
        cuts = sorted(self.rng.sample(range(start + 1, end), n - 1)) if n > 1 else []
        edges = [start] + cuts + [end]
        return list(zip(edges, edges[1:]))

    def add(self, speaker: str, utt_id: str, start: int) -> tuple[int, int]:
        """Append one utterance starting at ``start``; return (grain count, end)."""
        cfg, rng = self.cfg, self.rng
        u = rng.random()
        if u < cfg.nonspeech_rate:
            return self._single(speaker, utt_id, start, RawLabel.NON_SPEECH, NON_SPEECH)
        u -= cfg.nonspeech_rate
        if u < cfg.non_evaluated_rate:
            return self._single(speaker, utt_id, start, RawLabel.NON_EVALUATED, NON_EVALUATED)
        u -= cfg.non_evaluated_rate
        if u < cfg.redaction_rate * 0.3:
            return self._single(speaker, utt_id, start, RawLabel.REDACTED, NON_SPEECH)
        u -= cfg.redaction_rate * 0.3
        if u < cfg.languageless_rate * 0.2:
            end = start + max(cfg.min_grain_ms, int(rng.lognormvariate(math.log(400), 0.4)))
            tokens = tuple(RawToken(i, s, e, RawLabel.LANGUAGELESS)
                           for i, (s, e) in enumerate(self.split(start, end)))
            utt = Utterance(self.audio, speaker, utt_id, tokens)
            self.utterances.append(utt)
            self.pending_main.append((utt, speaker))
            return 1, end
        return self._speech(speaker, utt_id, start)

    def _single(self, speaker, utt_id, start, raw: RawLabel, truth: LanguageLabel):
        end = start + self.length(ENGLISH) // 2 + self.cfg.min_grain_ms
        self.utterances.append(Utterance(self.audio, speaker, utt_id, (RawToken(0, start, end, raw),)))
        self.truth.append((start, end, truth, speaker, utt_id))
        return 1, end

    def _speech(self, speaker, utt_id, start):
        cfg, rng = self.cfg, self.rng
        k = rng.choice((1, 1, 1, 2, 2, 3))
        if self.p_mandarin in (0.0, 1.0):
            k = 1
        lang = MANDARIN if rng.random() < self.p_mandarin else ENGLISH
        tokens: list[tuple[int, int, RawLabel]] = []
        t = start
        for gi in range(k):
            g_start, g_end = t, t + self.length(lang)
            raw_lang = RawLabel.ENGLISH if lang is ENGLISH else RawLabel.MANDARIN
            pieces = self.split(g_start, g_end)
            labels = [raw_lang] * len(pieces)
            redact = None
            if len(pieces) >= 3:
                if gi == 0 and rng.random() < cfg.languageless_rate:
                    labels[0] = RawLabel.LANGUAGELESS
                if rng.random() < cfg.red_dot_rate:
                    labels[-1] = RawLabel.RED_DOT_DISCOURSE
                # index 2 always stays a plain target token so every filler has
                # a same-language neighbour inside this grain
                if len(pieces) >= 5 and rng.random() < cfg.red_dot_rate:
                    labels[3] = RawLabel.RED_DOT_VOCAB
                if len(pieces) >= 5 and rng.random() < cfg.redaction_rate:
                    labels[1] = RawLabel.REDACTED
                    redact = pieces[1]
                if gi == k - 1 and labels[-1] is raw_lang and rng.random() < cfg.languageless_rate:
                    labels[-1] = RawLabel.LANGUAGELESS
            tokens.extend((s, e, lab) for (s, e), lab in zip(pieces, labels))
            if redact:
                self.truth.append((g_start, redact[0], lang, speaker, utt_id))
                self.truth.append((redact[1], g_end, lang, speaker, utt_id))
                self.excluded.append((redact[0], redact[1], lang))
            else:
                self.truth.append((g_start, g_end, lang, speaker, utt_id))
            t = g_end
            lang = lang.other()
        n = k
        if rng.random() < cfg.nonspeech_rate:
            end = t + self.cfg.min_grain_ms + rng.randint(0, 400)
            tokens.append((t, end, RawLabel.NON_SPEECH))
            self.truth.append((t, end, NON_SPEECH, speaker, utt_id))
            t, n = end, n + 1
        self.utterances.append(Utterance(self.audio, speaker, utt_id,
                                         tuple(RawToken(i, s, e, lab) for i, (s, e, lab) in enumerate(tokens))))
        return n, t

    def resolve_languageless(self):
        """Utterances made only of fillers take the speaker's majority language."""
        totals: dict[str, dict[RawLabel, int]] = {}
        for u in self.utterances:
            d = totals.setdefault(u.speaker, {RawLabel.ENGLISH: 0, RawLabel.MANDARIN: 0})
            for tok in u.tokens:
                if tok.raw_label in d:
                    d[tok.raw_label] += tok.end - tok.start
        for utt, speaker in self.pending_main:
            d = totals.get(speaker, {})
            e, m = d.get(RawLabel.ENGLISH, 0), d.get(RawLabel.MANDARIN, 0)
            if e == 0 and m == 0:
                # nothing to inherit from: emit plain non-speech instead
                idx = self.utterances.index(utt)
                toks = tuple(RawToken(t.token_index, t.start, t.end, RawLabel.NON_SPEECH) for t in utt.tokens)
                self.utterances[idx] = Utterance(utt.audio_name, utt.speaker, utt.utt_id, toks)
                for t in toks:
                    self.truth.append((t.start, t.end, NON_SPEECH, speaker, utt.utt_id))
                continue
            lang = ENGLISH if e >= m else MANDARIN
            self.truth.append((utt.tokens[0].start, utt.tokens[-1].end, lang, speaker, utt.utt_id))


def _regions(cfg: FixtureConfig, rng: random.Random, spans: list[tuple[int, int]]) -> list[tuple[int, int]]:
    lo = min(s for s, _ in spans)
    hi = max(e for _, e in spans)
    covered = normalize(spans)
    gaps = [(a.end, b.start) for a, b in zip(covered.spans, covered.spans[1:])]
    n = rng.randint(*cfg.regions_per_recording)
    j = cfg.region_jitter_ms
    if n == 2 and gaps:
        g0, g1 = rng.choice(gaps)
        out = [(lo, g0), (g1, hi)]
    else:
        out = [(lo, hi)]
    jittered = []
    floor = 0
    for i, (s, e) in enumerate(out):
        s2 = max(floor, s + rng.randint(-j, j))
        e2 = e + rng.randint(-j, j)
        if i + 1 < len(out):
            e2 = min(e2, out[i + 1][0] - 1)
        if e2 <= s2:
            s2, e2 = s, max(e, s + 1)
            s2 = max(s2, floor)
        jittered.append((s2, e2))
        floor = e2 + 1
    return jittered


def generate_corpus(config: FixtureConfig) -> Corpus:
    config.check()
    rng = random.Random(config.seed)
    recordings = []
    all_utts: list[Utterance] = []
    all_grains: list[Grain] = []
    regions_map: dict[str, SpanSet] = {}
    excluded_lines = []
    speakers = ("Mother", "Child", "Researcher")

    for r in range(config.recordings):
        audio = _audio_name(config.seed, r, rng)
        b = _RecordingBuilder(config, rng, audio)
        target = rng.randint(*config.grains_per_recording)
        count, cursor, prev_start, prev_end = 0, rng.randint(0, 2000), None, None
        u = 0
        while count < target:
            speaker = speakers[0] if rng.random() < 0.8 else rng.choice(speakers[1:])
            start = cursor
            if prev_end is not None and prev_end - prev_start > 1 and rng.random() < config.overlap_injection_rate:
                start = rng.randint(prev_start, prev_end - 1)
                speaker = speakers[1]
            u += 1
            snapshot = (len(b.utterances), len(b.truth), len(b.excluded), len(b.pending_main))
            n, end = b.add(speaker, f"u{u}", start)
            if config.max_recording_ms is not None and end > config.max_recording_ms:
                b.utterances = b.utterances[:snapshot[0]]
                b.truth = b.truth[:snapshot[1]]
                b.excluded = b.excluded[:snapshot[2]]
                b.pending_main = b.pending_main[:snapshot[3]]
                break
            count += n
            prev_start, prev_end = start, end
            cursor = max(cursor, end) + rng.randint(*config.gap_ms)
        if not b.utterances:
            raise FixtureConfigError(f"recording {r} received no utterances; raise max_recording_ms")
        b.resolve_languageless()

        rows = sorted(b.truth, key=lambda x: (x[0], x[1], x[2].value, x[3], x[4]))
        grains = [Grain(audio, f"a{i}", s, e, lab) for i, (s, e, lab, _, _) in enumerate(rows, start=1)]
        grains = _flag_overlaps_pairwise(grains)
        spans = [(t.start, t.end) for utt in b.utterances for t in utt.tokens]
        region_list = _regions(config, rng, spans)
        regions_map[audio] = normalize(region_list)
        all_utts.extend(b.utterances)
        all_grains.extend(grains)
        ex = sorted(b.excluded)
        excluded_lines.extend(f"{audio},{s},{e},{lab.value}\n" for s, e, lab in ex)
        recordings.append({
            "audio_name": audio,
            "regions": [list(x) for x in region_list],
            "excluded": [[s, e, lab.value] for s, e, lab in ex],
            "grains": [{"utt_id": g.utt_id, "start": g.start, "end": g.end, "language": g.language.value,
                        "overlap_diff_lang": g.overlap_diff_lang} for g in grains],
            "utterances": len(b.utterances),
        })

    manifest = {"config": json.loads(json.dumps(asdict(config))), "recordings": recordings}
    return Corpus(
        reference_csv=write_reference_csv(all_grains),
        regions_csv=write_evaluated_regions(regions_map),
        tokens_csv=write_raw_tokens(all_utts),
        excluded_csv="".join(excluded_lines),
        manifest=manifest,
    )


def _flag_overlaps_pairwise(grains: list[Grain]) -> list[Grain]:
    out = []
    for g in grains:
        flag = False
        if g.language in (ENGLISH, MANDARIN):
            flag = any(h.language is g.language.other() and g.start < h.end and h.start < g.end for h in grains)
        out.append(Grain(g.audio_name, g.utt_id, g.start, g.end, g.language, flag))
    return out


@dataclass
class Hypothesis:
    segments: list[ScoredSegment]
    turns: dict[str, list[LanguageTurn]]
    prediction_format: str = ONE_LINE

    @property
    def prediction_txt(self) -> str:
        return write_predictions(self.segments, self.prediction_format)

    def turn_files(self) -> dict[str, str]:
        return {f"{stem}.txt": write_language_turns(t) for stem, t in self.turns.items()}


def generate_hypothesis(
    manifest: dict,
    noise: NoiseConfig | None = None,
    seed: int = 0,
    prediction_format: str = ONE_LINE,
) -> Hypothesis:
    """Build a system output from ground truth; zero noise gives a perfect submission."""
    noise = noise or NoiseConfig()
    rng = random.Random(seed)
    grains = manifest_grains(manifest)

    segments = []
    for g in eligible_grains(grains):
        english = g.language is ENGLISH
        if rng.random() < noise.label_flip_rate:
            english = not english
        margin = rng.uniform(0.5, 10.0)
        offset = rng.gauss(0.0, 3.0)
        d = margin if english else -margin
        segments.append(ScoredSegment(SegmentId.from_grain(g), round(offset + d / 2, 6), round(offset - d / 2, 6)))

    turns: dict[str, list[LanguageTurn]] = {}
    for rec in manifest["recordings"]:
        audio = rec["audio_name"]
        lo = min(s for s, _ in rec["regions"])
        hi = max(e for _, e in rec["regions"])
        raw: list[tuple[int, int, LanguageLabel]] = []
        for g in rec["grains"]:
            lang = LanguageLabel(g["language"])
            if lang not in (ENGLISH, MANDARIN):
                continue
            if rng.random() < noise.deletion_rate:
                continue
            if rng.random() < noise.label_flip_rate:
                lang = lang.other()
            s, e = g["start"], g["end"]
            if noise.boundary_jitter_ms:
                j = noise.boundary_jitter_ms
                s2, e2 = max(0, s + rng.randint(-j, j)), e + rng.randint(-j, j)
                if e2 > s2:
                    s, e = s2, e2
            raw.append((s, e, lang))
            if rng.random() < noise.insertion_rate:
                length = max(50, int(rng.lognormvariate(math.log(800), 0.5)))
                s = rng.randint(lo, max(lo, hi - length))
                raw.append((s, s + length, rng.choice((ENGLISH, MANDARIN))))
        merged = []
        for lang in (ENGLISH, MANDARIN):
            for span in normalize((s, e) for s, e, lab in raw if lab is lang):
                merged.append(LanguageTurn(span.start, span.end, lang))
        merged.sort(key=lambda t: (t.start, t.end, t.language.value))
        turns[recording_stem(audio)] = merged
    return Hypothesis(segments, turns, prediction_format)


def _write_zip(path: str, files: dict[str, str]):
    with zipfile.ZipFile(path, "w", zipfile.ZIP_DEFLATED) as zf:
        for name in sorted(files):
            info = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
            info.compress_type = zipfile.ZIP_DEFLATED
            info.external_attr = 0o644 << 16
            zf.writestr(info, files[name])


def write_fixture_dir(corpus: Corpus, hyp: Hypothesis | None, out_dir: str) -> dict[str, str]:
    """Write a corpus (and optional submission) to ``out_dir``; return the paths written."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {}

    def put(rel: str, text: str):
        p = os.path.join(out_dir, rel)
        os.makedirs(os.path.dirname(p), exist_ok=True)
        with open(p, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        paths[rel] = p

    put("reference.csv", corpus.reference_csv)
    put("regions.csv", corpus.regions_csv)
    put("tokens.csv", corpus.tokens_csv)
    put("excluded.csv", corpus.excluded_csv)
    put("manifest.json", json.dumps(corpus.manifest, indent=1, sort_keys=True) + "\n")
    if hyp is not None:
        put("task1/prediction.txt", hyp.prediction_txt)
        for name, text in hyp.turn_files().items():
            put(f"task2/{name}", text)
        _write_zip(os.path.join(out_dir, "task1.zip"), {"prediction.txt": hyp.prediction_txt})
        _write_zip(os.path.join(out_dir, "task2.zip"), hyp.turn_files())
        paths["task1.zip"] = os.path.join(out_dir, "task1.zip")
        paths["task2.zip"] = os.path.join(out_dir, "task2.zip")
    return paths
