"""Differential run: interval-sweep DER tallies vs the millisecond-grid oracle.

    python scripts/oracle_sweep.py --fixtures 5000 --collar 0 --max-ms 60000
"""

import argparse
import json
import sys
import time

from cseval.annotations import recording_stem
from cseval.fixtures import FixtureConfig, NoiseConfig, generate_corpus, generate_hypothesis
from cseval.ld import brute_force_score, build_hypothesis_timeline, build_reference_timeline, score_recording
from cseval.timeline import EMPTY


def one(seed: int, collar: int, max_ms: int):
    noise = NoiseConfig(label_flip_rate=(seed % 5) / 10, boundary_jitter_ms=(seed % 7) * 60,
                        deletion_rate=(seed % 3) / 10, insertion_rate=(seed % 4) / 10)
    corpus = generate_corpus(FixtureConfig(seed=seed, recordings=1, grains_per_recording=(3, 30),
                                           overlap_injection_rate=0.3, max_recording_ms=max_ms))
    hyp = generate_hypothesis(corpus.manifest, noise, seed=seed)
    (audio,) = corpus.regions()
    grains, regions = corpus.grains(), corpus.regions()[audio]
    excluded = corpus.excluded().get(audio, EMPTY)
    turns = hyp.turns[recording_stem(audio)]
    ref = build_reference_timeline(audio, grains, regions, excluded, collar)
    fast = score_recording(ref, build_hypothesis_timeline(audio, turns, ref.scored_region))
    slow = brute_force_score(grains, list(regions), turns, list(excluded), collar)
    return fast, slow


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--fixtures", type=int, default=1000)
    ap.add_argument("--start-seed", type=int, default=0)
    ap.add_argument("--collar", type=int, default=0)
    ap.add_argument("--max-ms", type=int, default=60_000)
    args = ap.parse_args()

    t0 = time.perf_counter()
    bad, ref_ms = [], 0
    for seed in range(args.start_seed, args.start_seed + args.fixtures):
        fast, slow = one(seed, args.collar, args.max_ms)
        ref_ms += slow.ref_speech_ms
        if fast != slow:
            bad.append({"seed": seed, "sweep": fast.to_dict(), "oracle": slow.to_dict()})
    print(json.dumps({
        "fixtures": args.fixtures,
        "collar_ms": args.collar,
        "mismatches": len(bad),
        "reference_speech_ms": ref_ms,
        "seconds": round(time.perf_counter() - t0, 2),
        "first_mismatches": bad[:5],
    }, indent=2))
    sys.exit(1 if bad else 0)


if __name__ == "__main__":
    main()
