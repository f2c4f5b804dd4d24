"""Question analysis: tokenization, entity detection, temporal category and
signal tagging, and rule-based extraction of explicit temporal expressions.

Category bits (4): EXPLICIT, IMPLICIT, TEMPORAL-ANSWER, ORDINAL.
Signal bits (7):   BEFORE, AFTER, START, FINISH, ORDINAL, OVERLAP, NO-SIGNAL.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Iterable, Protocol

from .kg import KnowledgeGraph, Timestamp

CATEGORIES = ("EXPLICIT", "IMPLICIT", "TEMPORAL-ANSWER", "ORDINAL")
SIGNALS = ("BEFORE", "AFTER", "START", "FINISH", "ORDINAL", "OVERLAP", "NO-SIGNAL")

_TOKEN_RE = re.compile(r"[a-z0-9]+(?:[/'-][a-z0-9]+)*")

_STOPWORDS = frozenset(
    """a an the of in on at to for with by from and or is are was were be been
    did do does done who what when where which why how whose whom that this
    those these it its his her their he she they them him we you i as not
    's""".split()
)

_ORDINAL_WORDS = frozenset(
    "first second third fourth fifth sixth seventh eighth ninth tenth last final latest".split()
)
_ORDINAL_RANKS = {
    w: i + 1
    for i, w in enumerate(
        "first second third fourth fifth sixth seventh eighth ninth tenth".split()
    )
}
_ORDINAL_SUFFIX_RE = re.compile(r"^(\d+)(st|nd|rd|th)$")

_TEMPORAL_ANSWER_PREFIXES = (
    "when",
    "in which year",
    "in what year",
    "which year",
    "what year",
    "on what date",
    "on which date",
    "what date",
    "what time",
    "how long",
)

_MONTHS = {
    m: i + 1
    for i, m in enumerate(
        "january february march april may june july august september october november december".split()
    )
}

_YEAR_RE = re.compile(r"^(1[0-9]{3}|20[0-9]{2})$")
_DECADE_RE = re.compile(r"^(1[0-9]{2}|20[0-9])0s$")
_FULL_DATE_RE = re.compile(r"^(\d{1,2})[-/](\d{1,2})[-/](1[0-9]{3}|20[0-9]{2})$")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def _strip_possessive(token: str) -> str:
    return token[:-2] if token.endswith("'s") else token


def _load_data_file(name: str) -> list[tuple[str, str]]:
    out = []
    text = resources.files("tempoqa.data").joinpath(name).read_text(encoding="utf-8")
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        phrase, value = line.split("\t")
        out.append((phrase, value))
    return out


_SIGNAL_WORDS: dict[str, str] = dict(_load_data_file("signal_words.txt"))
_DATE_ALIASES: dict[str, Timestamp] = {
    phrase: Timestamp.parse(value) for phrase, value in _load_data_file("date_aliases.txt")
}

# Words that can introduce an implicit event expression ("before he was
# president", "during the ninth crusade").  Ordinals and start/finish verbs
# alone do not make a question implicit.
_IMPLICIT_TRIGGERS = frozenset(
    w for w, s in _SIGNAL_WORDS.items() if s in ("BEFORE", "AFTER", "OVERLAP")
)


@dataclass(frozen=True)
class QuestionAnalysis:
    raw: str
    tokens: tuple[str, ...]
    entities: frozenset[str]
    categories: tuple[int, int, int, int]
    signals: tuple[int, int, int, int, int, int, int]
    explicit_expressions: tuple[Timestamp, ...]
    ordinal_mentions: tuple[tuple[int, int], ...]

    def has_category(self, name: str) -> bool:
        return bool(self.categories[CATEGORIES.index(name)])

    def has_signal(self, name: str) -> bool:
        return bool(self.signals[SIGNALS.index(name)])


class EntityDetector(Protocol):
    """Maps question text to (span, item id) links; linked ids exist in the KG."""

    def __call__(self, text: str) -> set[tuple[str, str]]: ...


class GazetteerDetector:
    """Case-insensitive longest-match over entity labels and aliases.

    Label ties are broken by higher fact count, a proxy for prominence.
    """

    def __init__(self, kg: KnowledgeGraph, max_span: int = 4):
        self.kg = kg
        self.max_span = max_span
        self.lookup: dict[str, str] = {}
        for item_id in sorted(kg.items):
            it = kg.items[item_id]
            if it.kind != "entity":
                continue
            for name in {it.label, *it.aliases}:
                key = " ".join(tokenize(name))
                if not key:
                    continue
                prev = self.lookup.get(key)
                if prev is None or self._fact_count(item_id) > self._fact_count(prev):
                    self.lookup[key] = item_id

    def _fact_count(self, item_id: str) -> int:
        return len(self.kg.index.get(item_id, ()))

    def __call__(self, text: str) -> set[tuple[str, str]]:
        tokens = [_strip_possessive(t) for t in tokenize(text)]
        links: set[tuple[str, str]] = set()
        i = 0
        while i < len(tokens):
            matched = 0
            for width in range(min(self.max_span, len(tokens) - i), 0, -1):
                span = " ".join(tokens[i : i + width])
                if span in self.lookup:
                    links.add((span, self.lookup[span]))
                    matched = width
                    break
            i += matched or 1
        return links


def detect_entities(
    q: str, kg: KnowledgeGraph, detectors: Iterable[EntityDetector]
) -> frozenset[str]:
    """Union of all detectors' linked item ids."""
    detectors = list(detectors)
    if not detectors:
        raise ValueError("at least one entity detector required")
    ids: set[str] = set()
    for det in detectors:
        ids |= {item_id for _, item_id in det(q)}
    return frozenset(ids)


def extract_explicit_expressions(q: str) -> list[Timestamp]:
    """Years, full dates, decades and alias phrases, in order of appearance."""
    found: list[Timestamp] = []
    lower = q.lower()
    for phrase, ts in _DATE_ALIASES.items():
        if phrase in lower:
            found.append(ts)
    tokens = tokenize(q)
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        m = _FULL_DATE_RE.match(tok)
        if m:
            day, month, year = int(m.group(1)), int(m.group(2)), int(m.group(3))
            try:
                found.append(Timestamp(year, month, day))
                i += 1
                continue
            except ValueError:
                pass
        if tok in _MONTHS:
            # "january 2009" / "20 january 2009"
            month = _MONTHS[tok]
            year = None
            day = None
            if i + 1 < len(tokens) and _YEAR_RE.match(tokens[i + 1]):
                year = int(tokens[i + 1])
            if i > 0 and tokens[i - 1].isdigit() and 1 <= int(tokens[i - 1]) <= 31:
                day = int(tokens[i - 1])
            if year is not None:
                found.append(Timestamp(year, month, day))
                i += 2
                continue
        m = _DECADE_RE.match(tok)
        if m:
            found.append(Timestamp(int(m.group(1)) * 10))
            i += 1
            continue
        if _YEAR_RE.match(tok):
            found.append(Timestamp(int(tok)))
        i += 1
    return found


def _explicit_token_indexes(tokens: list[str]) -> set[int]:
    """Indexes of tokens that are part of an explicit temporal expression."""
    out = set()
    for i, tok in enumerate(tokens):
        if (
            _YEAR_RE.match(tok)
            or _DECADE_RE.match(tok)
            or _FULL_DATE_RE.match(tok)
            or tok in _MONTHS
            or tok in _DATE_ALIASES
        ):
            out.add(i)
    return out


def _ordinal_mentions(tokens: list[str]) -> list[tuple[int, int]]:
    """(token index, rank) pairs; 'last'/'final'/'latest' carry rank -1."""
    out = []
    for i, tok in enumerate(tokens):
        if tok in _ORDINAL_RANKS:
            out.append((i, _ORDINAL_RANKS[tok]))
        elif tok in ("last", "final", "latest"):
            out.append((i, -1))
        else:
            m = _ORDINAL_SUFFIX_RE.match(tok)
            if m:
                out.append((i, int(m.group(1))))
    return out


def _signal_phrases(tokens: list[str]) -> list[tuple[int, str, str]]:
    """(start index, phrase, signal) for every dictionary phrase occurrence.

    A question-initial interrogative 'when' is not a signal word.
    """
    hits = []
    phrases = sorted(_SIGNAL_WORDS, key=lambda p: -len(p.split()))
    taken: set[int] = set()
    for phrase in phrases:
        words = phrase.split()
        n = len(words)
        for i in range(len(tokens) - n + 1):
            if tokens[i : i + n] == words and not (set(range(i, i + n)) & taken):
                if phrase == "when" and i == 0:
                    continue
                hits.append((i, phrase, _SIGNAL_WORDS[phrase]))
                taken.update(range(i, i + n))
    return sorted(hits)


def tag_signals(q: str) -> tuple[int, ...]:
    """7-bit multi-hot over BEFORE..OVERLAP; NO-SIGNAL iff nothing matched."""
    tokens = tokenize(q)
    bits = [0] * 7
    for _, _, signal in _signal_phrases(tokens):
        bits[SIGNALS.index(signal)] = 1
    if not any(bits):
        bits[SIGNALS.index("NO-SIGNAL")] = 1
    return tuple(bits)


def tag_categories(q: str) -> tuple[int, int, int, int]:
    tokens = tokenize(q)
    explicit_idx = _explicit_token_indexes(tokens)
    bits = [0, 0, 0, 0]

    if extract_explicit_expressions(q):
        bits[CATEGORIES.index("EXPLICIT")] = 1

    # IMPLICIT: a before/after/overlap trigger followed by a content word that
    # is not itself part of an explicit temporal expression.
    for start, phrase, signal in _signal_phrases(tokens):
        if phrase not in _IMPLICIT_TRIGGERS:
            continue
        tail = range(start + len(phrase.split()), len(tokens))
        for j in tail:
            if j in explicit_idx:
                break
            tok = tokens[j]
            if tok in _STOPWORDS or tok in _ORDINAL_WORDS:
                continue
            bits[CATEGORIES.index("IMPLICIT")] = 1
            break
        if bits[CATEGORIES.index("IMPLICIT")]:
            break

    lower = " ".join(tokens)
    if any(lower.startswith(p) for p in _TEMPORAL_ANSWER_PREFIXES):
        bits[CATEGORIES.index("TEMPORAL-ANSWER")] = 1

    # ORDINAL: an ordinal token adjacent to a content word ("first film",
    # "last husband", "second position").
    for idx, _rank in _ordinal_mentions(tokens):
        neighbors = [tokens[j] for j in (idx + 1, idx - 1) if 0 <= j < len(tokens)]
        if any(t not in _STOPWORDS and not t.isdigit() for t in neighbors):
            bits[CATEGORIES.index("ORDINAL")] = 1
            break

    return tuple(bits)


def analyze_question(
    q: str,
    kg: KnowledgeGraph | None = None,
    detectors: Iterable[EntityDetector] | None = None,
) -> QuestionAnalysis:
    tokens = tokenize(q)
    if not tokens:
        raise ValueError("question has no tokens")
    if detectors is None:
        detectors = [GazetteerDetector(kg)] if kg is not None else []
    entities = detect_entities(q, kg, detectors) if detectors else frozenset()
    return QuestionAnalysis(
        raw=q,
        tokens=tuple(tokens),
        entities=entities,
        categories=tag_categories(q),
        signals=tag_signals(q),
        explicit_expressions=tuple(extract_explicit_expressions(q)),
        ordinal_mentions=tuple(_ordinal_mentions(tokens)),
    )


def content_keywords(tokens: Iterable[str]) -> list[str]:
    """Non-stopword tokens usable for terminal matching, possessives stripped."""
    out = []
    for tok in tokens:
        tok = _strip_possessive(tok)
        if tok and tok not in _STOPWORDS:
            out.append(tok)
    return out
