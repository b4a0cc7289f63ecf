import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from cseval.annotations import ENGLISH, MANDARIN, NON_SPEECH, Grain
from cseval.formats import ScoredSegment, SegmentId
from cseval.lid import (
    DegenerateTrialSetError,
    ScoringError,
    Trial,
    accuracy,
    balanced_accuracy,
    build_trials,
    det_curve,
    equal_error_rate,
    score_lid,
)
from oracles import brute_eer, brute_far_frr


def trials(targets, nontargets, audio="A"):
    out = []
    for i, s in enumerate(targets):
        out.append(Trial(SegmentId(audio, f"t{i}", i, i + 1), s, True, audio))
    for i, s in enumerate(nontargets):
        out.append(Trial(SegmentId(audio, f"n{i}", i, i + 1), s, False, audio))
    return out


def test_eer_hand_cases():
    assert equal_error_rate(trials([1, 2], [-1, -2])) == 0.0
    assert equal_error_rate(trials([2, -1], [-2, 1])) == 0.5
    assert equal_error_rate(trials([-1, -2], [1, 2])) == 1.0


def test_perfect_separation_point():
    curve = det_curve(trials([1, 2], [-1, -2]))
    assert (0.0, 0.0) in list(zip(curve.far.tolist(), curve.frr.tolist()))


def test_all_scores_equal():
    curve = det_curve(trials([3, 3], [3, 3, 3]))
    assert list(zip(curve.far.tolist(), curve.frr.tolist())) == [(1.0, 0.0), (0.0, 1.0)]


def test_det_monotone_and_matches_counting():
    rng = random.Random(0)
    for _ in range(50):
        tgt = [round(rng.gauss(1, 1), 1) for _ in range(rng.randint(1, 30))]
        non = [round(rng.gauss(-1, 1), 1) for _ in range(rng.randint(1, 30))]
        curve = det_curve(trials(tgt, non))
        for thr, far, frr in curve.points():
            assert (far, frr) == pytest.approx(brute_far_frr(tgt, non, thr), abs=0)
        assert all(a >= b for a, b in zip(curve.far, curve.far[1:]))
        assert all(a <= b for a, b in zip(curve.frr, curve.frr[1:]))
        assert equal_error_rate(trials(tgt, non)) == pytest.approx(brute_eer(tgt, non), abs=1e-12)


def test_degenerate():
    with pytest.raises(DegenerateTrialSetError):
        equal_error_rate(trials([1, 2], []))
    with pytest.raises(DegenerateTrialSetError):
        accuracy([])


def test_balanced_accuracy_five_sixths():
    ts = trials([1, 1, -1], [-1])
    rows, macro = balanced_accuracy(ts)
    assert macro == float(Fraction(5, 6))
    assert rows[0].recall_english == pytest.approx(2 / 3)
    assert not rows[0].single_language


def test_balanced_accuracy_degenerate_predictor_and_perfect():
    assert balanced_accuracy(trials([1, 2, 3], [4, 5]))[1] == 0.5
    assert balanced_accuracy(trials([1, 2, 3], [-4, -5]))[1] == 1.0


def test_single_language_file_and_macro():
    ts = trials([1, -1], [], audio="A") + trials([1], [-1], audio="B")
    rows, macro = balanced_accuracy(ts)
    assert [r.single_language for r in rows] == [True, False]
    assert macro == 0.75


def test_tie_decides_mandarin():
    assert balanced_accuracy(trials([0.0], [0.0]))[1] == 0.5
    assert accuracy(trials([0.0], [0.0])) == 0.5


def test_accuracy():
    assert accuracy(trials([1] * 5 + [-1], [-1] * 4)) == 0.9
    assert accuracy(trials([-1], [1])) == 0.0


def test_random_fixture_accuracy_recount():
    rng = random.Random(3)
    tgt = [rng.gauss(0.5, 1) for _ in range(300)]
    non = [rng.gauss(-0.5, 1) for _ in range(200)]
    correct = sum(s > 0 for s in tgt) + sum(s <= 0 for s in non)
    assert accuracy(trials(tgt, non)) == correct / 500


scores = st.lists(st.integers(-20, 20).map(lambda x: x / 4), min_size=1, max_size=25)


@given(scores, scores, st.integers(1, 5), st.integers(-10, 10), st.sampled_from(["affine", "cube", "exp"]))
def test_eer_rank_invariance(tgt, non, a, b, kind):
    f = {"affine": lambda x: a * x + b, "cube": lambda x: x ** 3, "exp": lambda x: math.exp(x) + b}[kind]
    assert equal_error_rate(trials([f(x) for x in tgt], [f(x) for x in non])) == equal_error_rate(trials(tgt, non))


@given(scores, scores)
def test_swap_and_negate(tgt, non):
    a = equal_error_rate(trials(tgt, non))
    b = equal_error_rate(trials([-x for x in non], [-x for x in tgt]))
    assert a == pytest.approx(b, abs=1e-12)
    assert 0 <= a <= 1


@given(scores, scores, st.integers(1, 100))
def test_balanced_accuracy_scale_free(tgt, non, k):
    assert balanced_accuracy(trials(tgt, non))[1] == balanced_accuracy(trials([k * x for x in tgt], [k * x for x in non]))[1]


def test_random_balanced_eer_near_half():
    rng = random.Random(2024)
    ts = trials([rng.random() for _ in range(5000)], [rng.random() for _ in range(5000)])
    assert abs(equal_error_rate(ts) - 0.5) <= 0.05


def test_build_trials_worked_scores():
    g = [Grain("S.wav", "a1", 1170, 2750, ENGLISH),
         Grain("S.wav", "a2", 3000, 3500, MANDARIN),
         Grain("S.wav", "a3", 4000, 4500, ENGLISH, overlap_diff_lang=True),
         Grain("S.wav", "a4", 5000, 5500, NON_SPEECH)]
    scored = [ScoredSegment(SegmentId("S", "a1", 1170, 2750), 4.21080, -10.018997),
              ScoredSegment(SegmentId("S", "a2", 3000, 3500), 0.0, 0.0)]
    ts = build_trials(g, scored)
    assert [(t.is_target, t.score) for t in ts.trials] == [(True, 4.21080 - -10.018997), (False, 0.0)]
    assert ts.trials[0].score == pytest.approx(14.229797, abs=1e-12)
    assert (ts.n_excluded_overlap, ts.n_excluded_nontarget_label) == (1, 1)


def test_build_trials_errors():
    g = [Grain("S.wav", "a1", 0, 10, ENGLISH)]
    with pytest.raises(ScoringError):
        build_trials(g, [])
    with pytest.raises(ScoringError):
        build_trials(g, [ScoredSegment(SegmentId("S", "a1", 0, 10), 1, 0),
                         ScoredSegment(SegmentId("S", "zz", 0, 10), 1, 0)])
    assert build_trials(g, [], require_all=False).n_unscored == 1


def test_score_lid_report():
    rep = score_lid(build_trials(
        [Grain("A.wav", "a1", 0, 10, ENGLISH), Grain("A.wav", "a2", 10, 20, MANDARIN)],
        [ScoredSegment(SegmentId("A", "a1", 0, 10), 2, 0), ScoredSegment(SegmentId("A", "a2", 10, 20), 0, 2)]))
    d = rep.to_dict()
    assert d["eer"] == 0 and d["balanced_accuracy_macro"] == 1 and d["accuracy"] == 1
    assert d["n_targets"] == d["n_nontargets"] == 1
    assert d["eer_per_file"] == {"A.wav": 0.0}
