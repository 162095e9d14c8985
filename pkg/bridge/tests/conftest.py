import json
import os
import random

import pytest
import torch

os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")
os.environ.setdefault("HF_HUB_DISABLE_PROGRESS_BARS", "1")
os.environ.setdefault("TRANSFORMERS_VERBOSITY", "error")

FILLER = ["int", "x", "=", "f", "(", ")", ";", "y", "z", "w", "q", "return"]


@pytest.fixture(scope="session")
def tiny_checkpoint(tmp_path_factory):
    """A local randomly-initialized sequence-classification checkpoint, so
    the suite runs without network access. The bridge treats it exactly
    like any published model id."""
    from tokenizers import Tokenizer
    from tokenizers.models import WordLevel
    from tokenizers.pre_tokenizers import Whitespace
    from transformers import (BertConfig, BertForSequenceClassification,
                              PreTrainedTokenizerFast)

    vocab = {"[PAD]": 0, "[UNK]": 1, "MARKER": 2}
    for token in FILLER:
        vocab[token] = len(vocab)
    tok = Tokenizer(WordLevel(vocab, unk_token="[UNK]"))
    tok.pre_tokenizer = Whitespace()
    fast = PreTrainedTokenizerFast(tokenizer_object=tok, pad_token="[PAD]",
                                   unk_token="[UNK]")
    config = BertConfig(vocab_size=len(vocab), hidden_size=32, num_hidden_layers=2,
                        num_attention_heads=2, intermediate_size=64,
                        max_position_embeddings=64, num_labels=2, pad_token_id=0)
    torch.manual_seed(0)
    model = BertForSequenceClassification(config)
    path = tmp_path_factory.mktemp("checkpoint")
    fast.save_pretrained(path)
    model.save_pretrained(path)
    return path


def corpus_records(n, prefix, seed, positive_rate=0.3, single_class=False):
    rng = random.Random(seed)
    records = []
    for i in range(n):
        actionable = (not single_class) and rng.random() < positive_rate
        tokens = [rng.choice(FILLER) for _ in range(rng.randint(8, 24))]
        if actionable:
            tokens[rng.randrange(len(tokens))] = "MARKER"
        records.append({"chain": f"{prefix}{i:04d}", "project": "p",
                        "label": int(actionable), "variant": "raw_method",
                        "tokens": " ".join(tokens), "type": "T", "category": "C"})
    return records


def write_corpus_dir(path, train_records, test_records):
    path.mkdir(parents=True, exist_ok=True)
    for name, records in (("train", train_records), ("test", test_records)):
        with (path / f"{name}.jsonl").open("w", encoding="utf-8") as fh:
            for record in records:
                fh.write(json.dumps(record) + "\n")
    return path


@pytest.fixture(scope="session")
def separable_corpus_dir(tmp_path_factory):
    return write_corpus_dir(tmp_path_factory.mktemp("corpus"),
                            corpus_records(100, "tr", seed=5),
                            corpus_records(60, "te", seed=6))
