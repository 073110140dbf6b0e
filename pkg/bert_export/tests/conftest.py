import csv
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

SPA_WORDS = ["mercado", "politica", "rio", "deporte", "alcalde", "nacion", "milagro", "cura", "escandalo", "golpe"]


def write_esp_csv(path, n_docs=24, seed=7):
    """Balanced synthetic corpus in the Spanish CSV schema."""
    rng = np.random.default_rng(seed)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["Id", "Category", "Topic", "Source", "Headline", "Text", "Link"])
        for i in range(n_docs):
            label = i % 2
            weights = np.ones(len(SPA_WORDS))
            if label:
                weights[5:] = 6.0
            else:
                weights[:5] = 6.0
            weights /= weights.sum()
            text = " ".join(rng.choice(SPA_WORDS, size=int(rng.integers(8, 16)), p=weights))
            title = " ".join(rng.choice(SPA_WORDS, size=3, p=weights))
            writer.writerow([i, "Fake" if label else "True", "t", "s", title, text, "l"])


@pytest.fixture(scope="session")
def tiny_checkpoint(tmp_path_factory):
    """A miniature randomly initialized checkpoint saved locally, so the
    real fine-tune/export code path runs without any network access."""
    from transformers import BertConfig, BertForSequenceClassification, BertTokenizerFast

    ckpt_dir = tmp_path_factory.mktemp("tiny_ckpt")
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + SPA_WORDS + list("abcdefghijklmnopqrstuvwxyz")
    vocab_file = ckpt_dir / "vocab.txt"
    vocab_file.write_text("\n".join(vocab) + "\n", encoding="utf-8")
    tokenizer = BertTokenizerFast(vocab_file=str(vocab_file), do_lower_case=True)
    tokenizer.save_pretrained(ckpt_dir)

    import torch

    torch.manual_seed(0)
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=64,
    )
    BertForSequenceClassification(config).save_pretrained(ckpt_dir)
    return str(ckpt_dir)
