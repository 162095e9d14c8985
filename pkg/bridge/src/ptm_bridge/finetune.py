"""Fine-tune a sequence-classification checkpoint on a warning corpus.

The bridge is checkpoint-agnostic: ``model`` may be any Hugging Face model
id or a local checkpoint directory. The five classic code models are
available as named presets, nothing more. Decoder-only checkpoints go
through the backend's standard sequence-classification adapter; models
without a pad token get the EOS token as padding.

Input is the triage pipeline's corpus export: a directory holding
``train.jsonl`` and ``test.jsonl``, one JSON record per line with ``chain``,
``label`` (0/1) and ``tokens`` (space-joined). Output is the pipeline's
score-file format: one record per test chain with ``chain``, ``score``,
``model``. The bridge never computes AUC itself; evaluation lives in the
pipeline.

Runs are deterministic for a fixed seed up to backend nondeterminism
(bit-exact on CPU; GPU kernels may introduce small variations).
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from transformers import AutoModelForSequenceClassification, AutoTokenizer

PRESETS = {
    "codebert": "microsoft/codebert-base",
    "graphcodebert": "microsoft/graphcodebert-base",
    "codet5": "Salesforce/codet5-base",
    "unixcoder": "microsoft/unixcoder-base",
    "codegpt": "microsoft/CodeGPT-small-java-adaptedGPT2",
}


class BridgeError(Exception):
    pass


@dataclass(frozen=True)
class BridgeConfig:
    model: str
    corpus_dir: Path
    output: Path
    epochs: int = 3
    batch_size: int = 8
    learning_rate: float = 5e-5
    sequence_cap: int = 256
    seed: int = 0

    def resolved_model(self) -> str:
        return PRESETS.get(self.model, self.model)


@dataclass(frozen=True)
class CorpusRecord:
    chain_id: str
    text: str
    label: int


def load_corpus(path: Path) -> list[CorpusRecord]:
    records = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not raw.strip():
            continue
        try:
            doc = json.loads(raw)
            records.append(CorpusRecord(chain_id=str(doc["chain"]),
                                        text=str(doc["tokens"]),
                                        label=int(doc["label"])))
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise BridgeError(f"{path}:{lineno}: bad corpus record: {exc}") from exc
    return records


def _seed_everything(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)


def _load_model(config: BridgeConfig):
    name = config.resolved_model()
    try:
        tokenizer = AutoTokenizer.from_pretrained(name)
        model = AutoModelForSequenceClassification.from_pretrained(name, num_labels=2)
    except OSError as exc:
        raise BridgeError(
            f"checkpoint {name!r} unavailable (download failed or path missing): {exc}"
        ) from exc
    if tokenizer.pad_token is None:
        tokenizer.pad_token = tokenizer.eos_token
        model.config.pad_token_id = tokenizer.pad_token_id
    max_len = getattr(model.config, "max_position_embeddings", None) \
        or tokenizer.model_max_length
    if config.sequence_cap > max_len:
        raise BridgeError(f"sequence cap {config.sequence_cap} exceeds the "
                          f"checkpoint's maximum input length {max_len}")
    return tokenizer, model


def _batches(n: int, batch_size: int, generator: random.Random | None = None):
    order = list(range(n))
    if generator is not None:
        generator.shuffle(order)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def finetune_and_score(config: BridgeConfig) -> Path:
    """Fine-tune on the corpus train part, score the test part, and write
    the score file. Returns the output path."""
    train_records = load_corpus(config.corpus_dir / "train.jsonl")
    test_records = load_corpus(config.corpus_dir / "test.jsonl")
    if not train_records:
        raise BridgeError("empty training corpus")
    labels_present = {r.label for r in train_records}
    if labels_present != {0, 1}:
        raise BridgeError(f"degenerate corpus: labels present {sorted(labels_present)}; "
                          "need both 0 and 1")

    _seed_everything(config.seed)
    tokenizer, model = _load_model(config)
    device = torch.device("cpu")
    model.to(device)

    def encode(records):
        return tokenizer([r.text for r in records], padding=True, truncation=True,
                         max_length=config.sequence_cap, return_tensors="pt")

    optimizer = torch.optim.AdamW(model.parameters(), lr=config.learning_rate)
    shuffler = random.Random(config.seed)
    model.train()
    for _ in range(config.epochs):
        for batch in _batches(len(train_records), config.batch_size, shuffler):
            records = [train_records[i] for i in batch]
            inputs = encode(records).to(device)
            labels = torch.tensor([r.label for r in records], device=device)
            loss = model(**inputs, labels=labels).loss
            if not torch.isfinite(loss):
                raise BridgeError("non-finite training loss")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()

    model.eval()
    scores: list[tuple[str, float]] = []
    with torch.no_grad():
        for start in range(0, len(test_records), config.batch_size):
            records = test_records[start:start + config.batch_size]
            logits = model(**encode(records).to(device)).logits
            probs = torch.softmax(logits, dim=-1)[:, 1]
            scores.extend((r.chain_id, float(p)) for r, p in zip(records, probs))

    config.output.parent.mkdir(parents=True, exist_ok=True)
    with config.output.open("w", encoding="utf-8") as fh:
        for chain_id, score in scores:
            score = min(1.0, max(0.0, score))
            fh.write(json.dumps({"chain": chain_id, "score": score,
                                 "model": config.model}, sort_keys=True) + "\n")
    return config.output
