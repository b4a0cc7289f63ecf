import pytest
from hypothesis import given, strategies as st

from cseval.annotations import ENGLISH, MANDARIN, NON_EVALUATED, NON_SPEECH, Grain
from cseval.formats import LanguageTurn
from cseval.ld import (
    REF_SPEECH,
    SCORED_REGION,
    DerBreakdown,
    TimelineMismatchError,
    UndefinedMetricError,
    aggregate,
    brute_force_score,
    build_hypothesis_timeline,
    build_reference_timeline,
    score_corpus,
    score_recording,
)
from cseval.timeline import Interval, SpanSet
from oracles import differential_case


def score(grains, regions, turns, excluded=(), collar=0):
    regions = SpanSet.of(*regions)
    ref = build_reference_timeline("A", grains, regions, SpanSet.of(*excluded), collar)
    fast = score_recording(ref, build_hypothesis_timeline("A", turns, ref.scored_region))
    slow = brute_force_score(grains, list(regions), turns, [Interval(*e) for e in excluded], collar)
    assert fast == slow
    return fast


def G(s, e, lab, i=[0]):
    i[0] += 1
    return Grain("A", f"a{i[0]}", s, e, lab)


def T(s, e, lab):
    return LanguageTurn(s, e, lab)


def test_confusion_example():
    b = score([G(0, 600, ENGLISH), G(600, 1000, MANDARIN)], [(0, 1000)],
              [T(0, 500, ENGLISH), T(500, 1000, MANDARIN)])
    assert (b.language_error_ms, b.missed_ms, b.false_alarm_ms, b.ref_speech_ms) == (100, 0, 0, 1000)
    assert aggregate([b]).der == 0.10
    assert b.english_error_ms == 100 and b.mandarin_error_ms == 0


def test_miss_false_alarm_example():
    b = score([G(0, 500, ENGLISH), G(500, 1000, NON_SPEECH)], [(0, 1000)], [T(250, 750, ENGLISH)])
    assert (b.missed_ms, b.false_alarm_ms, b.ref_speech_ms, b.language_error_ms) == (250, 250, 500, 0)
    assert aggregate([b]).der == 1.0
    assert aggregate([b], SCORED_REGION).der == 0.5


def test_reference_clipping_example():
    grains = [Grain("Audio2.wav", "a1", 0, 900, ENGLISH, True), Grain("Audio2.wav", "a2", 800, 2560, MANDARIN, True)]
    ref = build_reference_timeline("Audio2.wav", grains, SpanSet.of((0, 800)))
    assert ref.english.as_tuples() == [(0, 800)]
    assert ref.mandarin.as_tuples() == []
    assert ref.clipped_ms == 100 + 1760


def test_scored_region_without_exclusions():
    regions = SpanSet.of((0, 500), (700, 900))
    assert build_reference_timeline("A", [G(0, 100, ENGLISH)], regions).scored_region == regions


def test_non_evaluated_and_redaction_excised():
    b = score([G(0, 400, ENGLISH), G(400, 600, NON_EVALUATED), G(600, 1000, MANDARIN)], [(0, 1000)],
              [T(0, 1000, MANDARIN)], excluded=[(800, 900)])
    assert b.scored_region_ms == 700
    assert (b.language_error_ms, b.correct_ms, b.ref_speech_ms) == (400, 300, 700)


def test_overlap_counted_per_instant():
    b = score([G(0, 1000, ENGLISH), G(500, 1000, MANDARIN)], [(0, 1000)], [T(0, 1000, ENGLISH)])
    assert (b.correct_ms, b.missed_ms, b.ref_speech_ms) == (1000, 500, 1500)
    b = score([G(0, 1000, MANDARIN)], [(0, 1000)], [T(0, 1000, ENGLISH), T(0, 400, MANDARIN)])
    assert (b.correct_ms, b.language_error_ms, b.false_alarm_ms) == (400, 600, 400)


def test_empty_hypothesis():
    b = score([G(0, 300, ENGLISH), G(500, 900, MANDARIN)], [(0, 1000)], [])
    assert b.language_error_ms == b.false_alarm_ms == 0
    assert b.missed_ms == b.ref_speech_ms == 700


def test_hypothesis_outside_region_ignored():
    a = score([G(100, 300, ENGLISH)], [(100, 400)], [T(100, 300, ENGLISH)])
    b = score([G(100, 300, ENGLISH)], [(100, 400)], [T(0, 100, MANDARIN), T(100, 300, ENGLISH), T(400, 900, ENGLISH)])
    assert a == b


def test_collar():
    b = score([G(0, 600, ENGLISH), G(600, 1000, MANDARIN)], [(0, 1000)],
              [T(0, 500, ENGLISH), T(500, 1000, MANDARIN)], collar=100)
    assert b.language_error_ms == 0
    assert b.scored_region_ms == 1000 - 100 - 200 - 100


def test_mismatched_regions():
    ref = build_reference_timeline("A", [], SpanSet.of((0, 10)))
    hyp = build_hypothesis_timeline("A", [], SpanSet.of((0, 20)))
    with pytest.raises(TimelineMismatchError):
        score_recording(ref, hyp)


def test_aggregate_micro_and_errors():
    a = DerBreakdown(correct_ms=90, language_error_ms=10, ref_speech_ms=100, english_ref_ms=100, english_error_ms=10)
    b = DerBreakdown(missed_ms=300, ref_speech_ms=300, mandarin_ref_ms=300, mandarin_error_ms=300)
    r = aggregate({"b": b, "a": a})
    assert r.der == 310 / 400
    assert list(r.per_recording) == ["a", "b"]
    assert r.english_error_rate == 10 / 400 and r.english_error_rate_own == 0.1
    assert r.mandarin_error_rate_own == 1.0
    with pytest.raises(UndefinedMetricError):
        aggregate([DerBreakdown()])
    with pytest.raises(UndefinedMetricError):
        aggregate([])
    d = r.to_dict()
    assert d["denominators"] == {REF_SPEECH: 400, SCORED_REGION: 0}


def test_oracle_guard():
    with pytest.raises(ValueError):
        brute_force_score([], [Interval(0, 10**7 + 1)], [])


def test_score_corpus_threads_equal_serial():
    from concurrent.futures import ThreadPoolExecutor
    from cseval.fixtures import FixtureConfig, NoiseConfig, generate_corpus, generate_hypothesis
    c = generate_corpus(FixtureConfig(seed=9, recordings=6))
    h = generate_hypothesis(c.manifest, NoiseConfig(0.2, 100, 0.1, 0.1), seed=1)
    serial = score_corpus(c.grains(), c.regions(), h.turns, c.excluded())
    with ThreadPoolExecutor(4) as ex:
        threaded = score_corpus(c.grains(), c.regions(), h.turns, c.excluded(), map_fn=ex.map)
    assert serial == threaded
    assert aggregate(score_corpus(c.grains(), c.regions(), {}, c.excluded())).missed_rate == 1.0


@pytest.mark.parametrize("block", range(10))
def test_differential_against_grid(block):
    for seed in range(block * 100, block * 100 + 100):
        fast, slow, regions = differential_case(seed)
        assert fast == slow, seed
        assert regions.total_duration <= 60_000
        assert fast.correct_ms + fast.language_error_ms + fast.missed_ms == fast.ref_speech_ms


def test_differential_with_collar():
    for seed in range(40):
        fast, slow, _ = differential_case(seed, collar_ms=25 * (seed % 5))
        assert fast == slow, seed


span = st.tuples(st.integers(0, 3000), st.integers(1, 800)).map(lambda x: (x[0], x[0] + x[1]))
langs = st.sampled_from([ENGLISH, MANDARIN, NON_SPEECH, NON_EVALUATED])


@given(st.lists(st.tuples(span, langs), max_size=8), st.lists(st.tuples(span, st.sampled_from([ENGLISH, MANDARIN])), max_size=8),
       st.lists(span, min_size=1, max_size=3), st.lists(span, max_size=2), st.integers(0, 60))
def test_sweep_equals_grid_and_symmetry(ref, hyp, regions, excluded, collar):
    grains = [Grain("A", f"a{i}", s, e, lab) for i, ((s, e), lab) in enumerate(ref)]
    turns = [LanguageTurn(s, e, lab) for (s, e), lab in hyp]
    regs = SpanSet.of(*regions)
    b = score(grains, list(regs.as_tuples()), turns, excluded, collar)
    assert b.correct_ms + b.language_error_ms + b.missed_ms == b.ref_speech_ms

    swap = {ENGLISH: MANDARIN, MANDARIN: ENGLISH}
    g2 = [Grain(g.audio_name, g.utt_id, g.start, g.end, swap.get(g.language, g.language)) for g in grains]
    t2 = [LanguageTurn(t.start, t.end, swap[t.language]) for t in turns]
    s = score(g2, list(regs.as_tuples()), t2, excluded, collar)
    assert (s.language_error_ms, s.missed_ms, s.false_alarm_ms) == (b.language_error_ms, b.missed_ms, b.false_alarm_ms)
    assert (s.english_error_ms, s.mandarin_error_ms) == (b.mandarin_error_ms, b.english_error_ms)

    # perfect hypothesis built from the reference languages
    perfect = [LanguageTurn(g.start, g.end, g.language) for g in grains if g.language in (ENGLISH, MANDARIN)]
    p = score(grains, list(regs.as_tuples()), perfect, excluded, collar)
    assert p.language_error_ms == p.missed_ms == p.false_alarm_ms == 0
