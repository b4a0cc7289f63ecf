import json
import os

import pytest

from cseval.cli import run
from mutations import TASK1_TEXT, make_fixture

STEM = "TTS_P91182TT_VCST_ECxxx_01_AO_48503281_v001_R004_CRR_MERLion-CCS"


@pytest.fixture(scope="module")
def fixture_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("fx")
    cfg = out / "config.json"
    cfg.write_text(json.dumps({"seed": 21, "recordings": 4, "prediction_format": "two-line"}))
    assert run(["gen-fixtures", "--config", str(cfg), "--out", str(out / "data")]) == 0
    return out / "data"


def load(path):
    with open(path) as fh:
        return json.load(fh)


def test_score_lid_zero_noise(fixture_dir, tmp_path, capsys):
    out = tmp_path / "lid.json"
    code = run(["score-lid", "--ref", str(fixture_dir / "reference.csv"), "--pred", str(fixture_dir / "task1.zip"),
                "--out", str(out)])
    assert code == 0
    rep = load(out)
    assert rep["metrics"]["eer"] == 0 and rep["metrics"]["balanced_accuracy_macro"] == 1
    assert rep["validation"]["format"] == "two-line"
    assert any("auto-detected" in d for d in rep["decisions"])
    assert "EER 0.00%" in capsys.readouterr().out


def test_score_ld_zero_noise(fixture_dir, tmp_path, capsys):
    out = tmp_path / "ld.json"
    code = run(["score-ld", "--ref", str(fixture_dir / "reference.csv"), "--regions", str(fixture_dir / "regions.csv"),
                "--hyp", str(fixture_dir / "task2.zip"), "--excluded", str(fixture_dir / "excluded.csv"), "--out", str(out)])
    assert code == 0
    assert "DER 0.00%" in capsys.readouterr().out
    m = load(out)["metrics"]
    assert m["der"] == 0 and m["denominators"]["ref-speech"] > 0


def test_threads_do_not_change_report(fixture_dir, tmp_path, monkeypatch):
    args = ["score-ld", "--ref", str(fixture_dir / "reference.csv"), "--regions", str(fixture_dir / "regions.csv"),
            "--hyp", str(fixture_dir / "task2"), "--deterministic", "--collar", "50"]
    monkeypatch.setenv("EVAL_THREADS", "1")
    assert run(args + ["--out", str(tmp_path / "a.json")]) == 0
    monkeypatch.setenv("EVAL_THREADS", "4")
    assert run(args + ["--out", str(tmp_path / "b.json")]) == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_deterministic_reports_byte_identical(fixture_dir, tmp_path):
    args = ["score-lid", "--ref", str(fixture_dir / "reference.csv"), "--pred", str(fixture_dir / "task1.zip"),
            "--deterministic", "--out"]
    run(args + [str(tmp_path / "a.json")])
    run(args + [str(tmp_path / "b.json")])
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert "timing" not in load(tmp_path / "a.json")


def test_validate_missing_segment_exit_1(tmp_path):
    corpus, _ = make_fixture()
    (tmp_path / "ref.csv").write_text(corpus.reference_csv)
    (tmp_path / "prediction.txt").write_text(TASK1_TEXT["missing-segment"](corpus))
    code = run(["validate", "--task", "1", "--ref", str(tmp_path / "ref.csv"),
                "--pred", str(tmp_path / "prediction.txt"), "--out", str(tmp_path / "v.json")])
    assert code == 1
    rules = {v["rule"] for v in load(tmp_path / "v.json")["validation"]["violations"]}
    assert rules == {"missing-segment"}


def test_score_lid_invalid_exit_1_and_lenient(tmp_path):
    corpus, _ = make_fixture()
    (tmp_path / "ref.csv").write_text(corpus.reference_csv)
    (tmp_path / "prediction.txt").write_text(TASK1_TEXT["order-violation"](corpus))
    base = ["score-lid", "--ref", str(tmp_path / "ref.csv"), "--pred", str(tmp_path / "prediction.txt"), "--quiet",
            "--out", str(tmp_path / "r.json")]
    assert run(base) == 1
    assert run(base + ["--lenient"]) == 0
    assert load(tmp_path / "r.json")["metrics"]["eer"] == 0


def test_validate_task2_exit_codes(fixture_dir, tmp_path):
    base = ["validate", "--task", "2", "--regions", str(fixture_dir / "regions.csv"), "--quiet", "--out", str(tmp_path / "v.json")]
    assert run(base + ["--hyp", str(fixture_dir / "task2.zip")]) == 0
    bad = tmp_path / "hyp"
    bad.mkdir()
    for name in os.listdir(fixture_dir / "task2"):
        (bad / name).write_text((fixture_dir / "task2" / name).read_text())
    (bad / "stray.txt").write_text("0 1 English\n")
    assert run(base + ["--hyp", str(bad)]) == 1


def test_worked_score_lines_single_segment_exit_2(tmp_path, capsys):
    (tmp_path / "ref.csv").write_text(f"h,h,h,h,h,h\n{STEM}.wav,a1,1170,2750,English,False\n")
    sid = f"{STEM}_a1_1170_2750"
    (tmp_path / "prediction.txt").write_text(f"{sid} 0 4.21080\n{sid} 1 -10.018997\n")
    code = run(["score-lid", "--ref", str(tmp_path / "ref.csv"), "--pred", str(tmp_path / "prediction.txt")])
    assert code == 2
    assert "need both English and Mandarin" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["score-lid", "--ref", "/nonexistent/ref.csv", "--pred", "/nonexistent/p.txt"],
    ["stats"],
    ["no-such-command"],
    ["validate", "--task", "1"],
])
def test_failures_exit_2(argv):
    assert run(argv) == 2


def test_bad_reference_exit_2(tmp_path):
    (tmp_path / "ref.csv").write_text("h\nA.wav,a1,10,5,English,False\n")
    (tmp_path / "p.txt").write_text("")
    assert run(["score-lid", "--ref", str(tmp_path / "ref.csv"), "--pred", str(tmp_path / "p.txt")]) == 2


def test_bad_fixture_config_exit_2(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"recordings": 2, "noise": {"flip": 1}}))
    assert run(["gen-fixtures", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path / "o")]) == 2
    (tmp_path / "c.json").write_text("{not json")
    assert run(["gen-fixtures", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path / "o")]) == 2


def test_recode_and_stats(fixture_dir, tmp_path):
    assert run(["recode", "--tokens", str(fixture_dir / "tokens.csv"), "--out", str(tmp_path / "ref.csv"),
                "--excluded-out", str(tmp_path / "ex.csv")]) == 0
    assert (tmp_path / "ref.csv").read_text() == (fixture_dir / "reference.csv").read_text()
    assert (tmp_path / "ex.csv").read_text() == (fixture_dir / "excluded.csv").read_text()
    assert run(["stats", "--ref", str(tmp_path / "ref.csv"), "--regions", str(fixture_dir / "regions.csv"),
                "--out", str(tmp_path / "s.json"), "--hist-out", str(tmp_path / "h.csv")]) == 0
    st = load(tmp_path / "s.json")
    assert st["recordings"] == 4
    assert (tmp_path / "h.csv").read_text().startswith("series,language,bin_start_ms,bin_end_ms,count")


def test_version(capsys):
    assert run(["--version"]) == 0
