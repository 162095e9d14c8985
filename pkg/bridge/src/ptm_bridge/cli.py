"""Command-line entry point mirroring BridgeConfig."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .finetune import PRESETS, BridgeConfig, BridgeError, finetune_and_score


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="ptm-bridge",
        description="Fine-tune a pre-trained code model on an exported "
                    "warning corpus and write a score file.")
    parser.add_argument("--model", required=True,
                        help="checkpoint id, local path, or preset: "
                             + ", ".join(sorted(PRESETS)))
    parser.add_argument("--corpus", required=True, type=Path,
                        help="directory containing train.jsonl and test.jsonl")
    parser.add_argument("--output", required=True, type=Path,
                        help="score file to write")
    parser.add_argument("--epochs", type=int, default=3)
    parser.add_argument("--batch-size", type=int, default=8)
    parser.add_argument("--learning-rate", type=float, default=5e-5)
    parser.add_argument("--sequence-cap", type=int, default=256)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    config = BridgeConfig(model=args.model, corpus_dir=args.corpus,
                          output=args.output, epochs=args.epochs,
                          batch_size=args.batch_size,
                          learning_rate=args.learning_rate,
                          sequence_cap=args.sequence_cap, seed=args.seed)
    try:
        path = finetune_and_score(config)
    except BridgeError as exc:
        print(f"ptm-bridge: {exc}", file=sys.stderr)
        return 2
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
