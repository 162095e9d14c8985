"""Labeled datasets and every experimental arrangement: stratified splits,
within/cross-project scenarios, the fine-tuning fraction ladder, and the
corpus export format consumed by external classifiers.

All sampling is seeded and insensitive to input order (examples are put in
canonical chain-id order before any shuffle), so identical inputs produce
byte-identical exports. Examples are keyed by chain id: one example per
chain, and no arrangement ever places a chain in both train and test.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .core import LabelKind
from .labeling import GroundTruthLabel


class ContextVariant(Enum):
    RAW_METHOD = "raw_method"
    ABSTRACTED = "abstracted"
    LINE_ONLY = "line_only"


class ScenarioVariant(Enum):
    WITHIN1 = "within1"
    WITHIN2 = "within2"
    CROSS1 = "cross1"
    CROSS2 = "cross2"


class StratificationError(Exception):
    pass


@dataclass(frozen=True)
class LabeledExample:
    chain_id: str
    project: str
    warning_type: str
    category: str
    variant: ContextVariant
    tokens: tuple[str, ...]
    label: LabelKind

    def __post_init__(self) -> None:
        if self.label is LabelKind.UNKNOWN:
            raise ValueError("unknown labels never reach datasets")
        if not self.tokens:
            raise ValueError("token sequence must be non-empty")


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[LabeledExample, ...]
    validation: tuple[LabeledExample, ...]
    test: tuple[LabeledExample, ...]
    seed: int
    ratios: tuple[float, float, float]


@dataclass(frozen=True)
class ScenarioSpec:
    variant: ScenarioVariant
    held_out_project: str
    train: tuple[LabeledExample, ...]
    test: tuple[LabeledExample, ...]
    seed: int


def _half_up(x: float) -> int:
    return math.floor(x + 0.5)


def _canonical(examples: Iterable[LabeledExample]) -> list[LabeledExample]:
    return sorted(examples, key=lambda e: e.chain_id)


def assemble_examples(labels: Sequence[GroundTruthLabel], contexts: Sequence[dict],
                      variant: ContextVariant, project: str) -> list[LabeledExample]:
    """Join ground-truth labels with context records into examples.

    Chains that are excluded-unknown, have no usable context, or have an
    empty token stream are dropped; duplicates by chain id are collapsed.
    """
    by_chain = {record["chain"]: record for record in contexts}
    examples: dict[str, LabeledExample] = {}
    for label in labels:
        if label.kind is LabelKind.UNKNOWN or label.chain_id in examples:
            continue
        record = by_chain.get(label.chain_id)
        if record is None or record.get("scope") == "unavailable":
            continue
        key = "abstracted_tokens" if variant is ContextVariant.ABSTRACTED else "raw_tokens"
        tokens = record.get(key)
        if not tokens:
            continue
        examples[label.chain_id] = LabeledExample(
            chain_id=label.chain_id,
            project=project,
            warning_type=record.get("warning_type", ""),
            category=record.get("warning_category", ""),
            variant=variant,
            tokens=tuple(tokens),
            label=label.kind,
        )
    return list(examples.values())


# ---------------------------------------------------------------------------
# Stratified splitting


def _validate_ratios(ratios: Sequence[float]) -> tuple[float, float, float]:
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise ValueError(f"ratios must be three non-negative numbers, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    return tuple(ratios)  # type: ignore[return-value]


def stratified_split(examples: Sequence[LabeledExample],
                     ratios: Sequence[float], seed: int) -> DatasetSplit:
    """Per-class seeded shuffle, then contiguous train/validation/test
    slices. Eval shares are rounded half-up; train absorbs the remainder."""
    ratios = _validate_ratios(ratios)
    nonzero_parts = sum(1 for r in ratios if r > 0)
    by_class: dict[str, list[LabeledExample]] = {}
    for e in _canonical(examples):
        by_class.setdefault(e.label.value, []).append(e)

    for cls, members in sorted(by_class.items()):
        if len(members) < nonzero_parts:
            raise StratificationError(
                f"stratification infeasible: class {cls} has {len(members)} example(s) "
                f"for {nonzero_parts} nonzero part(s)")

    train: list[LabeledExample] = []
    validation: list[LabeledExample] = []
    test: list[LabeledExample] = []
    for cls, members in sorted(by_class.items()):
        rng = random.Random(f"{seed}:{cls}")
        rng.shuffle(members)
        n = len(members)
        n_val = _half_up(n * ratios[1])
        n_test = _half_up(n * ratios[2])
        while n_val + n_test > n:  # only under extreme rounding
            if n_test > 0:
                n_test -= 1
            else:
                n_val -= 1
        n_train = n - n_val - n_test
        train.extend(members[:n_train])
        validation.extend(members[n_train:n_train + n_val])
        test.extend(members[n_train + n_val:])
    return DatasetSplit(train=tuple(train), validation=tuple(validation),
                        test=tuple(test), seed=seed, ratios=ratios)


# ---------------------------------------------------------------------------
# Within/cross-project scenarios


def build_scenarios(examples: Sequence[LabeledExample], seed: int) -> list[ScenarioSpec]:
    """Four arrangements per project over a shared 50/50 per-project split.

    The test set is always the held-out half of the held-out project;
    training sets range from everything available (within1) down to empty
    (cross2).
    """
    by_project: dict[str, list[LabeledExample]] = {}
    for e in examples:
        by_project.setdefault(e.project, []).append(e)
    if len(by_project) < 2:
        raise ValueError("scenarios need at least 2 projects")

    halves: dict[str, tuple[tuple[LabeledExample, ...], tuple[LabeledExample, ...]]] = {}
    for project, members in sorted(by_project.items()):
        split = stratified_split(members, (0.5, 0.0, 0.5), seed)
        halves[project] = (split.train, split.test)

    scenarios = []
    for project in sorted(by_project):
        own_half, test_half = halves[project]
        others = tuple(e for other in sorted(by_project) if other != project
                       for e in _canonical(by_project[other]))
        train_sets = {
            ScenarioVariant.WITHIN1: others + own_half,
            ScenarioVariant.WITHIN2: own_half,
            ScenarioVariant.CROSS1: others,
            ScenarioVariant.CROSS2: (),
        }
        for variant in ScenarioVariant:
            scenarios.append(ScenarioSpec(
                variant=variant, held_out_project=project,
                train=train_sets[variant], test=test_half, seed=seed))
    return scenarios


# ---------------------------------------------------------------------------
# Fine-tuning fraction ladder


@dataclass(frozen=True)
class LadderRung:
    fraction: float
    examples: tuple[LabeledExample, ...]


def finetune_ladder(train: Sequence[LabeledExample], fractions: Sequence[float],
                    seed: int) -> list[LadderRung]:
    """Nested corpora drawn by one seeded shuffle of the training part.

    Sampling is random, not stratified: small rungs may be heavily
    imbalanced, which is part of what the ladder measures. Nesting removes
    sampling noise between rungs.
    """
    if list(fractions) != sorted(fractions):
        raise ValueError("fractions must be sorted ascending")
    if any(f < 0 or f > 1 for f in fractions):
        raise ValueError("fractions must lie in [0, 1]")
    ordered = _canonical(train)
    rng = random.Random(f"{seed}:ladder")
    rng.shuffle(ordered)
    rungs = []
    for fraction in fractions:
        size = _half_up(fraction * len(ordered))
        rungs.append(LadderRung(fraction=fraction, examples=tuple(ordered[:size])))
    return rungs


# ---------------------------------------------------------------------------
# Corpus export format (JSON Lines; label 0 = unactionable, 1 = actionable)


def example_to_record(e: LabeledExample) -> dict:
    return {
        "chain": e.chain_id,
        "project": e.project,
        "label": 1 if e.label is LabelKind.ACTIONABLE else 0,
        "variant": e.variant.value,
        "tokens": " ".join(e.tokens),
        "type": e.warning_type,
        "category": e.category,
    }


def export_corpus(examples: Sequence[LabeledExample], path: str | Path) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for e in examples:
            fh.write(json.dumps(example_to_record(e), sort_keys=True) + "\n")
    return len(examples)


def import_corpus(path: str | Path) -> list[LabeledExample]:
    examples = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        if not raw.strip():
            continue
        record = json.loads(raw)
        examples.append(LabeledExample(
            chain_id=record["chain"],
            project=record["project"],
            warning_type=record.get("type", ""),
            category=record.get("category", ""),
            variant=ContextVariant(record["variant"]),
            tokens=tuple(record["tokens"].split(" ")),
            label=LabelKind.ACTIONABLE if int(record["label"]) == 1 else LabelKind.UNACTIONABLE,
        ))
    return examples
