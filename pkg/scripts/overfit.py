"""Memorisation run: train a toy parser on N sentences and score it on the
same sentences after every epoch."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from udkit.conllu import read_conllu
from udkit.experiments import OVERFIT_CONFIG, overfit

DATA = Path(__file__).resolve().parent.parent / "tests" / "data"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("files", nargs="*", default=[DATA / "en_samples.conllu", DATA / "latin_other_samples.conllu"])
    parser.add_argument("--sentences", type=int, default=100)
    parser.add_argument("--epochs", type=int, default=OVERFIT_CONFIG.epochs)
    parser.add_argument("--seed", type=int, default=OVERFIT_CONFIG.seed)
    parser.add_argument("--no-regularization", action="store_true", help="turn off masking, smoothing and dropout")
    parser.add_argument("--full", action="store_true", help="run all epochs instead of stopping at the targets")
    args = parser.parse_args(argv)

    sentences = [s for f in args.files for s in read_conllu(f)][: args.sentences]
    config = replace(OVERFIT_CONFIG, epochs=args.epochs, seed=args.seed)
    if args.no_regularization:
        config = replace(config, mask_prob=0.0, label_smoothing=0.0, dropout=0.0, encoder_dropout=0.0, layer_dropout=0.0)
    result = overfit(sentences, config, stop_early=not args.full)
    print("epoch\tloss\tupos\tlas")
    for rec in result.records:
        print(f"{rec.epoch}\t{rec.train_loss:.4f}\t{rec.dev.upos.value:.4f}\t{rec.dev.las.value:.4f}")
    print(f"{len(sentences)} sentences: UPOS {result.upos:.4f}, LAS {result.las:.4f} "
          f"after {result.epochs} epochs in {result.seconds:.0f}s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
