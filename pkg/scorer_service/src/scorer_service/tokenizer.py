"""Word-level tokenizer with a vocabulary learned from training pairs."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass

_TOKEN = re.compile(r"[a-z0-9]+(?:['/\-][a-z0-9]+)*")

PAD, CLS, SEP, UNK = "[PAD]", "[CLS]", "[SEP]", "[UNK]"
SPECIALS = (PAD, CLS, SEP, UNK)


def words(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


@dataclass(frozen=True)
class Tokenizer:
    vocab: tuple[str, ...]  # specials first, then corpus words

    def __post_init__(self):
        if tuple(self.vocab[: len(SPECIALS)]) != SPECIALS:
            raise ValueError("vocabulary must start with the special tokens")

    @classmethod
    def fit(cls, texts, max_vocab: int = 5000) -> "Tokenizer":
        counts = Counter()
        for text in texts:
            counts.update(words(text))
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return cls(SPECIALS + tuple(w for w, _ in ranked[: max_vocab - len(SPECIALS)]))

    @property
    def index(self) -> dict[str, int]:
        return {w: i for i, w in enumerate(self.vocab)}

    def encode_pair(self, question: str, candidate: str, max_len: int = 64) -> list[int]:
        """[CLS] question [SEP] candidate [SEP], truncated to max_len."""
        idx = self.index
        unk = idx[UNK]
        ids = [idx[CLS]]
        ids += [idx.get(w, unk) for w in words(question)]
        ids.append(idx[SEP])
        ids += [idx.get(w, unk) for w in words(candidate)]
        ids.append(idx[SEP])
        return ids[:max_len]
