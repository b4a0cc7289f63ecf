import statistics

from cseval.annotations import ENGLISH, MANDARIN, NON_EVALUATED, Grain
from cseval.fixtures import FixtureConfig, generate_corpus
from cseval.stats import corpus_stats, format_hms, histogram_csv, length_histogram
from cseval.timeline import SpanSet


def test_single_grain():
    st = corpus_stats([Grain("A.wav", "a1", 0, 1000, ENGLISH)])
    assert st.recordings == 1
    assert st.english.segments == 1
    assert st.english.median_ms == st.english.mean_ms == 1000
    assert st.per_recording[0].mandarin_proportion == 0
    assert st.recordings_one_language == 1
    assert st.mandarin.median_ms is None


def test_hms():
    assert format_hms(0) == "00:00:00"
    assert format_hms(16 * 3600_000 + 9 * 60_000 + 27_000) == "16:09:27"


def test_histogram_bins():
    assert length_histogram([0, 99, 100, 350], 100) == [(0, 100, 2), (100, 200, 1), (200, 300, 0), (300, 400, 1)]
    assert length_histogram([], 100) == []


def test_stats_match_flat_recount():
    corpus = generate_corpus(FixtureConfig(seed=11, recordings=8))
    grains = corpus.grains()
    st = corpus_stats(grains, corpus.regions())

    # flat recount from the generator manifest
    eng, man, nonev, per = [], [], 0, {}
    for rec in corpus.manifest["recordings"]:
        e = m = 0
        for g in rec["grains"]:
            d = g["end"] - g["start"]
            if g["language"] == "English":
                eng.append(d)
                e += d
            elif g["language"] == "Mandarin":
                man.append(d)
                m += d
            elif g["language"] == "Non-Evaluated-Speech":
                nonev += d
        per[rec["audio_name"]] = (e, m)
    assert st.english.segments == len(eng) and st.mandarin.segments == len(man)
    assert st.english.total_ms == sum(eng) and st.mandarin.total_ms == sum(man)
    assert st.english.median_ms == statistics.median(eng)
    assert st.mandarin.mean_ms == sum(man) / len(man)
    assert st.non_evaluated_ms == nonev
    assert st.recordings == len(per)
    assert st.recordings_one_language == sum((e > 0) != (m > 0) for e, m in per.values())
    props = [m / (e + m) for e, m in per.values() if e + m]
    assert abs(st.mean_mandarin_proportion - sum(props) / len(props)) < 1e-12

    csv_text = histogram_csv(st, 100)
    rows = [r.split(",") for r in csv_text.strip().splitlines()[1:]]
    assert sum(int(r[4]) for r in rows if r[0] == "grain_length" and r[1] == "English") == len(eng)


def test_region_totals():
    st = corpus_stats([Grain("A.wav", "a1", 0, 10, NON_EVALUATED), Grain("A.wav", "a2", 10, 30, MANDARIN)],
                      {"A.wav": SpanSet.of((0, 100), (200, 250))})
    assert st.total_region_ms == 150
    assert st.per_recording[0].mandarin_proportion == 1.0
    assert st.non_evaluated_ms == 10
