"""Question-relevance scoring of verbalized facts and paths.

The scorer is a pluggable contract; the default is an IDF-weighted token
overlap computed over all verbalized facts of the loaded KG.  A remote scorer
speaks line-delimited JSON ({"question", "candidate"} -> {"score"}) over a
socket or a subprocess' standard streams.
"""

from __future__ import annotations

import json
import math
import random
import socket
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, Protocol

from .kg import Fact, KnowledgeGraph, Path, verbalize_fact, verbalize_path
from .question import tokenize


class ScoringError(Exception):
    pass


class RelevanceScorer(Protocol):
    def __call__(self, question: str, candidate: str) -> float: ...


@dataclass(frozen=True)
class ScoredFact:
    fact_id: str
    score: float

    @property
    def cost(self) -> float:
        return 1.0 - self.score


@dataclass(frozen=True)
class TrainingPair:
    question: str
    candidate: str
    label: int  # 1 = positive (fact contains a gold answer item)


class LexicalScorer:
    """IDF-weighted token-multiset overlap, bounded in [0, 1] and symmetric.

    score(a, b) = sum_t idf(t) * min(ca(t), cb(t)) / sum_t idf(t) * max(ca(t), cb(t))
    """

    def __init__(self, corpus: Iterable[str] = ()):
        df: Counter[str] = Counter()
        n_docs = 0
        for doc in corpus:
            n_docs += 1
            df.update(set(tokenize(doc)))
        self._df = df
        self._n = n_docs

    @classmethod
    def from_kg(cls, kg: KnowledgeGraph) -> "LexicalScorer":
        return cls(verbalize_fact(kg.facts[fid]) for fid in sorted(kg.facts))

    def idf(self, token: str) -> float:
        return math.log((self._n + 1) / (self._df.get(token, 0) + 1)) + 1.0

    def __call__(self, question: str, candidate: str) -> float:
        qc = Counter(tokenize(question))
        cc = Counter(tokenize(candidate))
        if not qc or not cc:
            return 0.0
        num = 0.0
        den = 0.0
        for tok in qc.keys() | cc.keys():
            w = self.idf(tok)
            num += w * min(qc[tok], cc[tok])
            den += w * max(qc[tok], cc[tok])
        return num / den if den else 0.0

    def encode(self, text: str) -> dict[str, float]:
        """IDF-weighted bag-of-tokens vector, used for path scoring."""
        counts = Counter(tokenize(text))
        return {tok: cnt * self.idf(tok) for tok, cnt in counts.items()}


class RemoteScorer:
    """Client for the line-delimited JSON scorer protocol.

    `transport` is a callable returning a (send_line, recv_line) pair; the
    provided factories cover TCP sockets and subprocess stdio.
    """

    def __init__(self, send_recv: Callable[[str], str]):
        self._send_recv = send_recv

    @classmethod
    def tcp(cls, host: str, port: int, timeout: float = 10.0) -> "RemoteScorer":
        def send_recv(line: str) -> str:
            try:
                with socket.create_connection((host, port), timeout=timeout) as sock:
                    sock.sendall((line + "\n").encode("utf-8"))
                    buf = b""
                    while not buf.endswith(b"\n"):
                        chunk = sock.recv(4096)
                        if not chunk:
                            break
                        buf += chunk
                return buf.decode("utf-8")
            except OSError as exc:
                raise ScoringError(f"remote scorer unreachable: {exc}") from exc

        return cls(send_recv)

    @classmethod
    def stdio(cls, proc) -> "RemoteScorer":
        def send_recv(line: str) -> str:
            try:
                proc.stdin.write(line + "\n")
                proc.stdin.flush()
                return proc.stdout.readline()
            except OSError as exc:
                raise ScoringError(f"scorer process failed: {exc}") from exc

        return cls(send_recv)

    def __call__(self, question: str, candidate: str) -> float:
        request = json.dumps({"question": question, "candidate": candidate})
        reply = self._send_recv(request)
        try:
            payload = json.loads(reply)
            score = float(payload["score"])
        except (ValueError, KeyError, TypeError) as exc:
            raise ScoringError(f"bad scorer response: {reply!r}") from exc
        if not math.isfinite(score) or not 0.0 <= score <= 1.0:
            raise ScoringError(f"score out of range: {score}")
        return score


class FallbackScorer:
    """Tries a primary scorer, falls back to a default on ScoringError."""

    def __init__(self, primary: RelevanceScorer, fallback: RelevanceScorer):
        self.primary = primary
        self.fallback = fallback

    def __call__(self, question: str, candidate: str) -> float:
        try:
            return self.primary(question, candidate)
        except ScoringError:
            return self.fallback(question, candidate)


def fact_contains_gold(f: Fact, gold: set[str]) -> bool:
    return any(it.id in gold for it in [f.subject] + f.objects())


def make_training_pairs(
    q: str,
    facts: Iterable[Fact],
    gold: set[str],
    neg_ratio: int = 5,
    seed: int = 0,
) -> list[TrainingPair]:
    """Distant supervision: facts containing a gold item are positives; for
    each positive, `neg_ratio` negatives sampled uniformly without replacement.
    """
    if neg_ratio < 1:
        raise ValueError("neg_ratio must be >= 1")
    facts = sorted(facts, key=lambda f: f.id)
    if not facts:
        raise ValueError("facts must be nonempty")
    positives = [f for f in facts if fact_contains_gold(f, gold)]
    if not positives:
        return []
    negatives_pool = [f for f in facts if not fact_contains_gold(f, gold)]
    rng = random.Random(seed)
    pairs: list[TrainingPair] = []
    for pos in positives:
        pairs.append(TrainingPair(q, verbalize_fact(pos), 1))
        n = min(neg_ratio, len(negatives_pool))
        for neg in rng.sample(negatives_pool, n):
            pairs.append(TrainingPair(q, verbalize_fact(neg), 0))
    return pairs


def score_fact(q: str, f: Fact, scorer: RelevanceScorer) -> float:
    score = scorer(q, verbalize_fact(f))
    if not 0.0 <= score <= 1.0:
        raise ScoringError(f"scorer returned {score} outside [0, 1]")
    return score


def select_relevant_facts(
    q: str, facts: Iterable[Fact], scorer: RelevanceScorer, n: int = 25
) -> list[ScoredFact]:
    """Top-n facts by score, descending; ties broken by fact id."""
    if n < 1:
        raise ValueError("n must be >= 1")
    scored = [ScoredFact(f.id, score_fact(q, f, scorer)) for f in facts]
    scored.sort(key=lambda s: (-s.score, s.fact_id))
    return scored[:n]


def select_temporal_facts(
    q: str, tfacts: Iterable[Fact], scorer: RelevanceScorer, n: int = 25
) -> list[ScoredFact]:
    from .kg import is_temporal_fact

    tfacts = list(tfacts)
    for f in tfacts:
        if not is_temporal_fact(f):
            raise ValueError(f"fact {f.id} is not temporal")
    if not tfacts:
        return []
    return select_relevant_facts(q, tfacts, scorer, n)


def _cosine(a: dict[str, float], b: dict[str, float]) -> float | None:
    na = math.sqrt(sum(v * v for v in a.values()))
    nb = math.sqrt(sum(v * v for v in b.values()))
    if na == 0.0 or nb == 0.0:
        return None
    dot = sum(v * b.get(k, 0.0) for k, v in a.items())
    return dot / (na * nb)


def score_path(
    q: str,
    p: Path,
    kg: KnowledgeGraph,
    encoder: Callable[[str], dict[str, float]],
) -> float:
    """(1 + cos) / 2 of the encoded question and verbalized path; 0.5 when
    either encoding is the zero vector."""
    cos = _cosine(encoder(q), encoder(verbalize_path(p, kg)))
    if cos is None:
        return 0.5
    return (1.0 + cos) / 2.0
