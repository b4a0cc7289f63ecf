"""Metric response to controlled hypothesis noise on a seeded synthetic corpus.

Prints a CSV with one row per (noise kind, level): EER, balanced accuracy,
accuracy and DER with its components.

    python scripts/noise_sweep.py --recordings 40 --seed 3 > sweep.csv
"""

import argparse
import csv
import sys

from cseval.fixtures import FixtureConfig, NoiseConfig, generate_corpus, generate_hypothesis
from cseval.ld import aggregate, score_corpus
from cseval.lid import build_trials, score_lid

SWEEPS = {
    "label_flip_rate": [0.0, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0],
    "boundary_jitter_ms": [0, 50, 100, 200, 400, 800],
    "deletion_rate": [0.0, 0.1, 0.25, 0.5, 1.0],
    "insertion_rate": [0.0, 0.1, 0.25, 0.5, 1.0],
}


def main():
    ap = argparse.ArgumentParser(description="sweep hypothesis noise and report metrics")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--recordings", type=int, default=30)
    ap.add_argument("--denominator", default="ref-speech")
    args = ap.parse_args()

    corpus = generate_corpus(FixtureConfig(seed=args.seed, recordings=args.recordings))
    grains, regions, excluded = corpus.grains(), corpus.regions(), corpus.excluded()
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["noise", "level", "eer", "balanced_accuracy", "accuracy", "der",
                  "language_error_rate", "missed_rate", "false_alarm_rate"])
    for kind, levels in SWEEPS.items():
        for level in levels:
            hyp = generate_hypothesis(corpus.manifest, NoiseConfig(**{kind: level}), seed=args.seed + 1)
            lid = score_lid(build_trials(grains, hyp.segments))
            der = aggregate(score_corpus(grains, regions, hyp.turns, excluded), args.denominator)
            out.writerow([kind, level, f"{lid.eer:.4f}", f"{lid.balanced_accuracy_macro:.4f}", f"{lid.accuracy:.4f}",
                          f"{der.der:.4f}", f"{der.language_error_rate:.4f}", f"{der.missed_rate:.4f}",
                          f"{der.false_alarm_rate:.4f}"])


if __name__ == "__main__":
    main()
