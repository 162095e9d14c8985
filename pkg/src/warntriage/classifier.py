"""Trainable-classifier contract plus the native baseline.

The baseline is a learned token-embedding bag: mean-pooled embeddings feed
a linear head with softmax, trained by mini-batch gradient descent. It is
deliberately small: it exercises the full tokenize/embed/pool/head/softmax
contract that heavier external models plug into via score files, without
pretending to be one of them.

Training is deterministic in (seed, corpus); prediction is a pure function
of (model, example), and unseen tokens map to a reserved unknown index so
prediction never fails.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .core import LabelKind
from .datasets import LabeledExample

UNKNOWN_TOKEN = "<unk>"
DEFAULT_THRESHOLD = 0.5


class DegenerateCorpusError(Exception):
    """Corpus is empty or single-class; no classifier can be trained."""


class TrainingDivergedError(Exception):
    pass


@dataclass(frozen=True)
class ClassifierConfig:
    kind: str = "native_baseline"  # native_baseline | external
    sequence_cap: int = 256
    embedding_width: int = 32
    epochs: int = 30
    batch_size: int = 4
    learning_rate: float = 5e-5
    seed: int = 0
    threshold: float = DEFAULT_THRESHOLD

    def __post_init__(self) -> None:
        if self.sequence_cap <= 0 or self.embedding_width <= 0:
            raise ValueError("sequence_cap and embedding_width must be positive")
        if self.epochs <= 0 or self.batch_size <= 0 or self.learning_rate <= 0:
            raise ValueError("epochs, batch_size and learning_rate must be positive")


@dataclass(frozen=True)
class PredictionScore:
    chain_id: str
    score: float  # probability of label 1 (actionable)
    predicted_label: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")
        if self.predicted_label not in (0, 1):
            raise ValueError("predicted_label must be 0 or 1")


@dataclass
class TrainedModel:
    config: ClassifierConfig
    vocabulary: dict[str, int]
    embeddings: np.ndarray  # (V, d)
    head_weights: np.ndarray  # (d, 2)
    head_bias: np.ndarray  # (2,)
    training_log: list[float] = field(default_factory=list)


def build_vocabulary(corpus: Sequence[LabeledExample]) -> dict[str, int]:
    """Frequency-ordered vocabulary with index 0 reserved for unknowns."""
    counts: dict[str, int] = {}
    for e in corpus:
        for token in e.tokens:
            counts[token] = counts.get(token, 0) + 1
    vocab = {UNKNOWN_TOKEN: 0}
    for token in sorted(counts, key=lambda t: (-counts[t], t)):
        vocab[token] = len(vocab)
    return vocab


def encode(examples: Sequence[LabeledExample], vocabulary: dict[str, int],
           cap: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pack token indices CSR-style: (tok, offsets, labels)."""
    unk = vocabulary[UNKNOWN_TOKEN]
    tok: list[int] = []
    offsets = [0]
    labels = []
    for e in examples:
        tok.extend(vocabulary.get(t, unk) for t in e.tokens[:cap])
        offsets.append(len(tok))
        labels.append(1 if e.label is LabelKind.ACTIONABLE else 0)
    return (np.asarray(tok, dtype=np.int64),
            np.asarray(offsets, dtype=np.int64),
            np.asarray(labels, dtype=np.int64))


def init_model(config: ClassifierConfig, vocabulary: dict[str, int]) -> TrainedModel:
    """Seeded random initialization; this is also the 0%-corpus model."""
    rng = np.random.default_rng(config.seed)
    v = len(vocabulary)
    d = config.embedding_width
    return TrainedModel(
        config=config,
        vocabulary=vocabulary,
        embeddings=rng.normal(0.0, 0.1, (v, d)),
        head_weights=rng.normal(0.0, 0.1, (d, 2)),
        head_bias=np.zeros(2),
    )


def train(config: ClassifierConfig, corpus: Sequence[LabeledExample]) -> TrainedModel:
    if not corpus:
        raise DegenerateCorpusError("empty corpus")
    labels_present = {e.label for e in corpus}
    if len(labels_present) < 2:
        only = next(iter(labels_present)).value
        raise DegenerateCorpusError(f"degenerate corpus: only {only} examples")

    vocabulary = build_vocabulary(corpus)
    model = init_model(config, vocabulary)
    tok, offsets, labels = encode(corpus, vocabulary, config.sequence_cap)
    n = len(corpus)
    rng = np.random.default_rng((config.seed, 0x5eed))
    for _ in range(config.epochs):
        order = rng.permutation(n).astype(np.int64)
        total = _kernels.train_epoch(tok, offsets, labels, order, config.batch_size,
                                     config.learning_rate, model.embeddings,
                                     model.head_weights, model.head_bias)
        mean_loss = total / n
        if not np.isfinite(mean_loss):
            raise TrainingDivergedError(
                f"non-finite loss at epoch {len(model.training_log) + 1}: {mean_loss}")
        model.training_log.append(float(mean_loss))
    return model


def predict_probs(model: TrainedModel, examples: Sequence[LabeledExample]) -> np.ndarray:
    tok, offsets, _ = encode(examples, model.vocabulary, model.config.sequence_cap)
    probs = np.empty((len(examples), 2))
    _kernels.forward_probs(tok, offsets, model.embeddings,
                           model.head_weights, model.head_bias, probs)
    return probs


def predict(model: TrainedModel, examples: Sequence[LabeledExample]) -> list[PredictionScore]:
    probs = predict_probs(model, examples)
    threshold = model.config.threshold
    return [PredictionScore(chain_id=e.chain_id,
                            score=float(probs[i, 1]),
                            predicted_label=int(probs[i, 1] >= threshold))
            for i, e in enumerate(examples)]


def loss_and_gradients(model: TrainedModel, corpus: Sequence[LabeledExample]):
    """Mean loss and dense analytic gradients, for verification against
    finite differences."""
    tok, offsets, labels = encode(corpus, model.vocabulary, model.config.sequence_cap)
    gemb = np.zeros_like(model.embeddings)
    gw = np.zeros_like(model.head_weights)
    gb = np.zeros_like(model.head_bias)
    loss = _kernels.loss_and_grads(tok, offsets, labels, model.embeddings,
                                   model.head_weights, model.head_bias, gemb, gw, gb)
    return float(loss), gemb, gw, gb


# ---------------------------------------------------------------------------
# Score files (the external-model bridge format)


@dataclass
class ScoreImport:
    scores: list[PredictionScore]
    errors: list[str]
    duplicates: int


def export_scores(scores: Iterable[PredictionScore], path: str | Path,
                  model_name: str) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8") as fh:
        for s in scores:
            fh.write(json.dumps({"chain": s.chain_id, "score": s.score,
                                 "model": model_name}, sort_keys=True) + "\n")
            count += 1
    return count


def import_scores(path: str | Path, known_chain_ids: set[str] | None = None,
                  threshold: float = DEFAULT_THRESHOLD) -> ScoreImport:
    """Validate and load a score file. Duplicate chain ids are last-wins
    (counted); bad records are collected, not fatal."""
    by_chain: dict[str, PredictionScore] = {}
    errors: list[str] = []
    duplicates = 0
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            record = json.loads(raw)
        except json.JSONDecodeError as exc:
            errors.append(f"line {lineno}: invalid JSON: {exc.msg}")
            continue
        chain = record.get("chain")
        if not isinstance(chain, str) or not chain:
            errors.append(f"line {lineno}: missing chain id")
            continue
        try:
            score = float(record["score"])
        except (KeyError, TypeError, ValueError):
            errors.append(f"line {lineno}: missing or non-numeric score")
            continue
        if not 0.0 <= score <= 1.0:
            errors.append(f"line {lineno}: score {score} outside [0, 1]")
            continue
        if known_chain_ids is not None and chain not in known_chain_ids:
            errors.append(f"line {lineno}: unknown chain id {chain}")
            continue
        if chain in by_chain:
            duplicates += 1
        by_chain[chain] = PredictionScore(chain_id=chain, score=score,
                                          predicted_label=int(score >= threshold))
    return ScoreImport(scores=list(by_chain.values()), errors=errors, duplicates=duplicates)
