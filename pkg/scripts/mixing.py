"""Mixed-batch transfer: dev LAS per synthetic grammar when trained alone
versus jointly on the concatenation of both treebanks."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from udkit.experiments import MIXING_CONFIG, mixing


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--train", type=int, default=200, help="training sentences per grammar")
    parser.add_argument("--dev", type=int, default=100, help="dev sentences per grammar")
    parser.add_argument("--epochs", type=int, default=MIXING_CONFIG.epochs)
    parser.add_argument("--seed", type=int, default=13)
    args = parser.parse_args(argv)

    config = replace(MIXING_CONFIG, epochs=args.epochs, seed=args.seed)
    result = mixing(args.train, args.dev, config, seed=args.seed)
    print("grammar\tseparate\tjoint\tratio")
    for g, r in result.ratios().items():
        print(f"{g}\t{result.separate[g]:.4f}\t{result.joint[g]:.4f}\t{r:.4f}")
    print(f"{result.seconds:.0f}s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
