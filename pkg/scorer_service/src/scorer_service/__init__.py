"""Relevance scorer sidecar: a small transformer sequence-pair classifier
trained from scratch and served over a line-delimited JSON protocol."""

__all__ = ["model", "tokenizer", "train", "server"]
