"""Command-line entry point.

Exit codes: 0 success, 1 invalid submission, 2 I/O, parse or config failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
import zipfile
from concurrent.futures import ThreadPoolExecutor

from . import __version__
from .annotations import (
    AnnotationError,
    parse_evaluated_regions,
    parse_excluded_spans,
    parse_raw_tokens,
    eligible_grains,
    parse_reference_csv,
    write_reference_csv,
)
from .fixtures import FixtureConfig, FixtureConfigError, NoiseConfig, generate_corpus, generate_hypothesis, write_fixture_dir
from .formats import AUTO, ONE_LINE, TWO_LINE, FormatError, SegmentId, SubmissionError
from .ld import REF_SPEECH, SCORED_REGION, UndefinedMetricError, aggregate, score_corpus
from .lid import DegenerateTrialSetError, ScoringError, build_trials, score_lid
from .recoding import RecodeError, recode_corpus, write_excluded_csv
from .stats import corpus_stats, histogram_csv
from .validation import validate_task1, validate_task2

log = logging.getLogger("cseval")

EXIT_OK, EXIT_INVALID, EXIT_FAILURE = 0, 1, 2


class UsageFailure(Exception):
    """Raised for problems that map to exit code 2."""


def _read(path: str) -> str:
    with open(path, encoding="utf-8-sig") as fh:
        return fh.read()


def _digest(path: str) -> str:
    h = hashlib.sha256()
    if os.path.isdir(path):
        for root, _, names in sorted(os.walk(path)):
            for name in sorted(names):
                full = os.path.join(root, name)
                h.update(os.path.relpath(full, path).encode())
                with open(full, "rb") as fh:
                    h.update(fh.read())
    else:
        with open(path, "rb") as fh:
            h.update(fh.read())
    return h.hexdigest()


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("EVAL_THREADS", "1")))
    except ValueError:
        return 1


class Report:
    def __init__(self, command: str, args: argparse.Namespace, inputs: dict[str, str | None]):
        self.started = time.perf_counter()
        self.deterministic = getattr(args, "deterministic", False)
        config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out", "quiet")}
        self.body = {
            "tool_version": __version__,
            "command": command,
            "task": getattr(args, "task", None),
            "config": config,
            "inputs": {k: {"path": v, "sha256": _digest(v)} for k, v in inputs.items() if v},
            "decisions": [],
        }

    def __setitem__(self, key, value):
        self.body[key] = value

    def decide(self, notes):
        self.body["decisions"].extend(notes)

    def emit(self, out: str | None):
        if not self.deterministic:
            self.body["timing"] = {"seconds": round(time.perf_counter() - self.started, 4)}
        text = json.dumps(self.body, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
        if out:
            with open(out, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)


def _info(args, msg: str):
    if not args.quiet:
        target = sys.stderr if not args.out else sys.stdout
        print(msg, file=target)


def _expected_ids(grains) -> list[SegmentId]:
    return [SegmentId.from_grain(g) for g in eligible_grains(grains)]


def cmd_validate(args) -> int:
    if args.task == 1:
        if not args.ref or not args.pred:
            raise UsageFailure("validate --task 1 needs --ref and --pred")
        grains = parse_reference_csv(_read(args.ref))
        rep = Report("validate", args, {"ref": args.ref, "pred": args.pred})
        result = validate_task1(args.pred, _expected_ids(grains), fmt=args.format)
    else:
        if not args.hyp or not (args.regions or args.ref):
            raise UsageFailure("validate --task 2 needs --hyp and --regions (or --ref)")
        if args.regions:
            names = list(parse_evaluated_regions(_read(args.regions)))
        else:
            names = sorted({g.audio_name for g in parse_reference_csv(_read(args.ref))})
        rep = Report("validate", args, {"ref": args.ref, "regions": args.regions, "hyp": args.hyp})
        result = validate_task2(args.hyp, names)
    rep["validation"] = result.to_dict()
    rep.decide(result.notes)
    rep.emit(args.out)
    _info(args, f"{'VALID' if result.valid else 'INVALID'}: {len(result.violations)} violation(s)")
    return EXIT_OK if result.valid else EXIT_INVALID


def cmd_score_lid(args) -> int:
    grains = parse_reference_csv(_read(args.ref))
    rep = Report("score-lid", args, {"ref": args.ref, "pred": args.pred})
    rep["task"] = 1
    result = validate_task1(args.pred, _expected_ids(grains), fmt=args.format)
    rep["validation"] = result.to_dict()
    rep.decide(result.notes)
    blocking = result.rules - ({"order-violation"} if args.lenient else set())
    if blocking:
        rep.emit(args.out)
        _info(args, f"INVALID submission: {', '.join(sorted(blocking))}")
        return EXIT_INVALID
    if args.lenient and result.rules:
        rep.decide(["lenient mode: out-of-order segments scored by id"])
    trials = build_trials(grains, result.segments)
    report = score_lid(trials)
    if report.decisions_tied:
        rep.decide([f"{report.decisions_tied} detection score(s) exactly 0 decided as Mandarin"])
    single = [f.audio_name for f in report.balanced_accuracy_per_file if f.single_language]
    if single:
        rep.decide([f"{len(single)} single-language file(s) use that language's recall as balanced accuracy"])
    rep["metrics"] = report.to_dict()
    rep.emit(args.out)
    _info(args, f"EER {100 * report.eer:.2f}%  balanced accuracy {100 * report.balanced_accuracy_macro:.2f}%")
    return EXIT_OK


def cmd_score_ld(args) -> int:
    grains = parse_reference_csv(_read(args.ref))
    regions = parse_evaluated_regions(_read(args.regions))
    excluded = parse_excluded_spans(_read(args.excluded)) if args.excluded else None
    rep = Report("score-ld", args, {"ref": args.ref, "regions": args.regions, "hyp": args.hyp,
                                    "excluded": args.excluded})
    rep["task"] = 2
    result = validate_task2(args.hyp, list(regions))
    rep["validation"] = result.to_dict()
    if not result.valid and not args.lenient:
        rep.emit(args.out)
        _info(args, f"INVALID submission: {', '.join(sorted(result.rules))}")
        return EXIT_INVALID
    threads = _threads()
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            per = score_corpus(grains, regions, result.turns, excluded, args.collar, pool.map)
    else:
        per = score_corpus(grains, regions, result.turns, excluded, args.collar)
    res = aggregate(per, args.denominator)
    rep["metrics"] = res.to_dict()
    if args.collar:
        rep.decide([f"collar of {args.collar} ms removed around reference turn boundaries"])
    rep.emit(args.out)
    _info(args, (f"DER {100 * res.der:.2f}%  (language error {100 * res.language_error_rate:.2f}%, "
                 f"missed {100 * res.missed_rate:.2f}%, false alarm {100 * res.false_alarm_rate:.2f}%)  "
                 f"English error {100 * res.english_error_rate:.2f}%  Mandarin error {100 * res.mandarin_error_rate:.2f}%"))
    return EXIT_OK


def cmd_recode(args) -> int:
    res = recode_corpus(parse_raw_tokens(_read(args.tokens)))
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        fh.write(write_reference_csv(res.grains))
    if args.excluded_out:
        with open(args.excluded_out, "w", encoding="utf-8", newline="") as fh:
            fh.write(write_excluded_csv(res.excluded))
    for note in res.notes:
        log.info(note)
    print(f"wrote {len(res.grains)} grains to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_stats(args) -> int:
    grains = parse_reference_csv(_read(args.ref))
    regions = parse_evaluated_regions(_read(args.regions)) if args.regions else None
    st = corpus_stats(grains, regions)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(st.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if args.hist_out:
        with open(args.hist_out, "w", encoding="utf-8", newline="") as fh:
            fh.write(histogram_csv(st, args.bin_ms))
    print(f"{st.recordings} recordings, {st.english.segments} English / {st.mandarin.segments} Mandarin segments",
          file=sys.stderr)
    return EXIT_OK


def cmd_gen_fixtures(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        raw = json.load(fh)
    try:
        noise = NoiseConfig(**raw.pop("noise", {}))
    except TypeError as e:
        raise FixtureConfigError(f"bad noise config: {e}") from None
    fmt = raw.pop("prediction_format", ONE_LINE)
    hyp_seed = raw.pop("hypothesis_seed", raw.get("seed", 0))
    corpus = generate_corpus(FixtureConfig.from_dict(raw))
    hyp = generate_hypothesis(corpus.manifest, noise, hyp_seed, fmt)
    paths = write_fixture_dir(corpus, hyp, args.out)
    print(f"wrote {len(paths)} files to {args.out}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cseval", description="Code-switched LID / language diarization scoring")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", help="write the JSON report here instead of standard output")
        sp.add_argument("--deterministic", action="store_true", help="omit timing from the report")
        sp.add_argument("--quiet", action="store_true")

    sp = sub.add_parser("score-lid", help="validate and score a language identification submission")
    sp.add_argument("--ref", required=True)
    sp.add_argument("--pred", required=True, help="prediction.txt, results zip, or directory")
    sp.add_argument("--format", choices=(AUTO, TWO_LINE, ONE_LINE), default=AUTO)
    sp.add_argument("--lenient", action="store_true", help="score complete but out-of-order files")
    common(sp)
    sp.set_defaults(func=cmd_score_lid)

    sp = sub.add_parser("score-ld", help="validate and score a language diarization submission")
    sp.add_argument("--ref", required=True)
    sp.add_argument("--regions", required=True)
    sp.add_argument("--hyp", required=True, help="directory or zip of per-recording turn files")
    sp.add_argument("--excluded", help="CSV of redacted spans removed from scoring")
    sp.add_argument("--denominator", choices=(REF_SPEECH, SCORED_REGION), default=REF_SPEECH)
    sp.add_argument("--collar", type=int, default=0, metavar="MS")
    sp.add_argument("--lenient", action="store_true", help="score even if validation fails")
    common(sp)
    sp.set_defaults(func=cmd_score_ld)

    sp = sub.add_parser("validate", help="validate a submission without scoring")
    sp.add_argument("--task", type=int, choices=(1, 2), required=True)
    sp.add_argument("--ref")
    sp.add_argument("--pred")
    sp.add_argument("--regions")
    sp.add_argument("--hyp")
    sp.add_argument("--format", choices=(AUTO, TWO_LINE, ONE_LINE), default=AUTO)
    common(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("recode", help="recode raw tokens into a reference CSV")
    sp.add_argument("--tokens", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--excluded-out")
    sp.set_defaults(func=cmd_recode)

    sp = sub.add_parser("stats", help="corpus statistics and histogram data")
    sp.add_argument("--ref", required=True)
    sp.add_argument("--regions")
    sp.add_argument("--out", required=True)
    sp.add_argument("--hist-out")
    sp.add_argument("--bin-ms", type=int, default=100)
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("gen-fixtures", help="write a seeded synthetic corpus and submission")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_gen_fixtures)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_FAILURE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not hasattr(args, "quiet"):
        args.quiet = False
    try:
        return args.func(args)
    except (OSError, zipfile.BadZipFile) as e:
        print(f"error: {e}", file=sys.stderr)
    except (AnnotationError, FormatError, SubmissionError, RecodeError, FixtureConfigError,
            DegenerateTrialSetError, ScoringError, UndefinedMetricError, UsageFailure,
            json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
    return EXIT_FAILURE


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
