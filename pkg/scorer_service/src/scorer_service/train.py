"""Fine-tuning on question-candidate pairs with binary labels.

Pairs file: one JSON object per line with keys "question", "candidate",
"label" (0 or 1).  Training minimizes -log softmax(C W^T)[label]; the
validation split accuracy is reported per epoch.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import ModelConfig, TransformerScorer
from .nn import Adam, NnError
from .tokenizer import Tokenizer


@dataclass(frozen=True)
class Pair:
    question: str
    candidate: str
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")


@dataclass
class FineTuneJob:
    pairs_path: str
    epochs: int = 2
    batch_size: int = 16
    learning_rate: float = 1e-3
    val_fraction: float = 0.2
    seed: int = 0
    config: ModelConfig = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.config is None:
            self.config = ModelConfig(seed=self.seed)


def load_pairs(path: str | Path) -> list[Pair]:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                pairs.append(Pair(rec["question"], rec["candidate"], rec["label"]))
            except (ValueError, KeyError) as exc:
                raise ValueError(f"{path}:{lineno}: bad pair record: {exc}") from exc
    if not pairs:
        raise ValueError(f"{path}: no training pairs")
    return pairs


@dataclass(frozen=True)
class FineTuneResult:
    model: TransformerScorer
    losses: tuple[float, ...]
    val_accuracy: float


def accuracy(model: TransformerScorer, pairs: list[Pair]) -> float:
    if not pairs:
        return 0.0
    hits = sum(
        1
        for p in pairs
        if (model.score(p.question, p.candidate) >= 0.5) == bool(p.label)
    )
    return hits / len(pairs)


def finetune(job: FineTuneJob, log_fn=None) -> FineTuneResult:
    pairs = load_pairs(job.pairs_path)
    rng = np.random.default_rng(job.seed)
    order = rng.permutation(len(pairs))
    n_val = int(round(len(pairs) * job.val_fraction))
    val = [pairs[i] for i in order[:n_val]]
    train = [pairs[i] for i in order[n_val:]]
    if not train:
        raise ValueError("validation split leaves no training pairs")

    tokenizer = Tokenizer.fit(
        [p.question for p in train] + [p.candidate for p in train]
    )
    model = TransformerScorer(job.config, tokenizer)
    if job.epochs == 0:
        return FineTuneResult(model, (), accuracy(model, val))

    opt = Adam(model.store, lr=job.learning_rate, clip=1.0)
    losses = []
    for epoch in range(job.epochs):
        ep_rng = np.random.default_rng((job.seed, epoch))
        idx = ep_rng.permutation(len(train))
        total = 0.0
        for start in range(0, len(idx), job.batch_size):
            batch = [train[i] for i in idx[start : start + job.batch_size]]
            model.store.zero_grad()
            batch_loss = None
            for p in batch:
                ids = model.tokenizer.encode_pair(
                    p.question, p.candidate, model.config.max_len
                )
                loss = model.loss(ids, p.label, rng=ep_rng) * (1.0 / len(batch))
                batch_loss = loss if batch_loss is None else batch_loss + loss
            if not np.isfinite(batch_loss.data):
                raise NnError(
                    f"training diverged: non-finite loss at epoch {epoch}, "
                    f"batch {start // job.batch_size}"
                )
            batch_loss.backward()
            opt.step()
            total += float(batch_loss.data) * len(batch)
        mean_loss = total / len(train)
        losses.append(mean_loss)
        if log_fn:
            log_fn(epoch, mean_loss, accuracy(model, val))
    return FineTuneResult(model, tuple(losses), accuracy(model, val))
