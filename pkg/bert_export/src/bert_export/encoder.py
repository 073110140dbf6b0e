"""Transformer backends: per-fold fine-tuning and CLS-vector extraction."""

from __future__ import annotations

import logging

import numpy as np
import torch

logger = logging.getLogger(__name__)

# Hub names for the three checkpoint roles; any can be overridden with a
# local directory via --checkpoint-path.
DEFAULT_CHECKPOINTS = {
    "eng": "bert-base-uncased",
    "spa": "dccuchile/bert-base-spanish-wwm-cased",
    "mult": "bert-base-multilingual-cased",
}

FINETUNE_EPOCHS = 5
FINETUNE_LR = 3e-5


class JobError(Exception):
    pass


class Encoder:
    """A sequence-classification model plus tokenizer, ready to fine-tune
    on one training fold and then emit pooled (classification-token)
    vectors for arbitrary documents."""

    def __init__(self, checkpoint_path: str, max_length: int | None = None, device: str = "cpu"):
        from transformers import AutoModelForSequenceClassification, AutoTokenizer

        try:
            self.tokenizer = AutoTokenizer.from_pretrained(checkpoint_path)
            self.model = AutoModelForSequenceClassification.from_pretrained(
                checkpoint_path, num_labels=2
            )
        except (OSError, ValueError) as exc:
            raise JobError(f"checkpoint {checkpoint_path!r} could not be loaded: {exc}") from exc
        self.device = torch.device(device)
        self.model.to(self.device)
        limit = getattr(self.tokenizer, "model_max_length", 512)
        if limit is None or limit > 100_000:  # tokenizer reports "unbounded"
            limit = self.model.config.max_position_embeddings
        self.max_length = min(max_length, limit) if max_length else limit

    @property
    def hidden_size(self) -> int:
        return int(self.model.config.hidden_size)

    def _encode(self, texts: list[str]):
        enc = self.tokenizer(
            texts,
            padding=True,
            truncation=True,
            max_length=self.max_length,
            return_tensors="pt",
        )
        truncated = int((enc["attention_mask"].sum(dim=1) == self.max_length).sum())
        if truncated:
            logger.info("truncated %d/%d documents to %d tokens", truncated, len(texts), self.max_length)
        return {k: v.to(self.device) for k, v in enc.items()}

    def finetune(self, texts: list[str], labels: list[int], seed: int, batch_size: int = 16) -> None:
        """Five epochs of AdamW at 3e-5 on the training fold only."""
        torch.manual_seed(seed)
        self.model.train()
        optimizer = torch.optim.AdamW(self.model.parameters(), lr=FINETUNE_LR)
        order_rng = np.random.default_rng(seed)
        y = torch.tensor(labels, dtype=torch.long)
        for _ in range(FINETUNE_EPOCHS):
            perm = order_rng.permutation(len(texts))
            for start in range(0, len(texts), batch_size):
                rows = perm[start : start + batch_size]
                batch = self._encode([texts[i] for i in rows])
                out = self.model(**batch, labels=y[rows].to(self.device))
                optimizer.zero_grad()
                out.loss.backward()
                optimizer.step()
        self.model.eval()

    @torch.no_grad()
    def embed(self, texts: list[str], batch_size: int = 32) -> np.ndarray:
        """Final-layer classification-token vector per document."""
        self.model.eval()
        chunks = []
        for start in range(0, len(texts), batch_size):
            batch = self._encode(texts[start : start + batch_size])
            hidden = self.model.base_model(**batch).last_hidden_state
            chunks.append(hidden[:, 0, :].cpu().numpy())
        out = np.concatenate(chunks, axis=0) if chunks else np.zeros((0, self.hidden_size))
        if not np.isfinite(out).all():
            raise JobError("encoder produced non-finite embeddings")
        return out.astype(np.float32)
