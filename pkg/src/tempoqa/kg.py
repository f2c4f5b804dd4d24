"""n-ary knowledge graph store: items, facts with qualifiers, indexing and paths.

Facts and items live in two JSON-lines files (one record per line).  The store
is immutable after loading, so readers may share it freely across threads.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from functools import total_ordering
from typing import Iterable, TextIO

ITEM_KINDS = {"entity", "predicate", "literal", "type", "timestamp"}


class KGError(Exception):
    """Base error for knowledge-graph loading and lookups."""


class ParseError(KGError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ConflictError(KGError):
    pass


class NotFoundError(KGError):
    pass


@total_ordering
@dataclass(frozen=True)
class Timestamp:
    """A point in time at year, month or day resolution."""

    year: int
    month: int | None = None
    day: int | None = None

    def __post_init__(self):
        if self.day is not None and self.month is None:
            raise ValueError("day requires month")
        if self.month is not None and not 1 <= self.month <= 12:
            raise ValueError(f"month out of range: {self.month}")
        if self.day is not None and not 1 <= self.day <= 31:
            raise ValueError(f"day out of range: {self.day}")

    @property
    def resolution(self) -> str:
        if self.day is not None:
            return "day"
        if self.month is not None:
            return "month"
        return "year"

    def sort_key(self) -> tuple[int, int, int]:
        # Missing fields rank before present ones at equal prefixes.
        return (self.year, self.month or 0, self.day or 0)

    def __lt__(self, other: "Timestamp") -> bool:
        return self.sort_key() < other.sort_key()

    def render(self) -> str:
        """dd-mm-yyyy at day resolution, mm-yyyy at month, yyyy at year."""
        if self.day is not None:
            return f"{self.day:02d}-{self.month:02d}-{self.year:04d}"
        if self.month is not None:
            return f"{self.month:02d}-{self.year:04d}"
        return f"{self.year:04d}"

    def isoformat(self) -> str:
        if self.day is not None:
            return f"{self.year:04d}-{self.month:02d}-{self.day:02d}"
        if self.month is not None:
            return f"{self.year:04d}-{self.month:02d}"
        return f"{self.year:04d}"

    @classmethod
    def parse(cls, text: str) -> "Timestamp":
        """Parse 'YYYY', 'YYYY-MM' or 'YYYY-MM-DD'."""
        parts = text.split("-")
        if not 1 <= len(parts) <= 3 or not all(p.isdigit() for p in parts):
            raise ValueError(f"bad timestamp: {text!r}")
        year = int(parts[0])
        month = int(parts[1]) if len(parts) > 1 else None
        day = int(parts[2]) if len(parts) > 2 else None
        return cls(year, month, day)


@dataclass(frozen=True)
class Item:
    id: str
    label: str
    kind: str
    aliases: frozenset[str] = frozenset()
    timestamp: Timestamp | None = None

    def __post_init__(self):
        if self.kind not in ITEM_KINDS:
            raise ValueError(f"unknown item kind: {self.kind!r}")
        if self.kind == "timestamp" and self.timestamp is None:
            raise ValueError(f"timestamp item {self.id} missing value")
        if self.kind in ("entity", "predicate") and not self.aliases:
            object.__setattr__(self, "aliases", frozenset({self.label}))


@dataclass(frozen=True)
class Fact:
    """An n-ary statement: main triple plus ordered qualifier pairs."""

    id: str
    subject: Item
    predicate: Item
    object: Item
    qualifiers: tuple[tuple[Item, Item], ...] = ()

    def __post_init__(self):
        if self.subject.kind != "entity":
            raise ValueError(f"fact {self.id}: subject must be an entity")
        if self.predicate.kind != "predicate":
            raise ValueError(f"fact {self.id}: predicate kind mismatch")
        for qp, _ in self.qualifiers:
            if qp.kind != "predicate":
                raise ValueError(f"fact {self.id}: qualifier predicate kind mismatch")

    def items(self) -> list[Item]:
        out = [self.subject, self.predicate, self.object]
        for qp, qo in self.qualifiers:
            out.extend((qp, qo))
        return out

    def objects(self) -> list[Item]:
        """Main object plus qualifier objects."""
        return [self.object] + [qo for _, qo in self.qualifiers]

    def timestamps(self) -> list[Timestamp]:
        return [o.timestamp for o in self.objects() if o.kind == "timestamp"]


@dataclass(frozen=True)
class Path:
    """A chain of facts where consecutive facts share an item."""

    facts: tuple[str, ...]
    endpoints: tuple[str, str]

    def __post_init__(self):
        if not self.facts:
            raise ValueError("empty path")

    def __len__(self) -> int:
        return len(self.facts)


@dataclass
class KnowledgeGraph:
    items: dict[str, Item] = field(default_factory=dict)
    facts: dict[str, Fact] = field(default_factory=dict)
    # item id -> fact ids where the item appears in any position
    index: dict[str, set[str]] = field(default_factory=dict)

    def item(self, item_id: str) -> Item:
        try:
            return self.items[item_id]
        except KeyError:
            raise NotFoundError(f"unknown item: {item_id}") from None

    def facts_of(self, entity: str) -> set[Fact]:
        """All facts where the item appears as subject, object or qualifier object."""
        self.item(entity)
        return {self.facts[fid] for fid in self.index.get(entity, ())}

    def entity_neighbors(self, entity: str) -> set[str]:
        """Entities reachable through one fact of `entity`."""
        out: set[str] = set()
        for f in self.facts_of(entity):
            for it in [f.subject] + f.objects():
                if it.kind == "entity" and it.id != entity:
                    out.add(it.id)
        return out

    def temporal_facts_of(self, entity: str, hops: int = 1) -> set[Fact]:
        if hops not in (1, 2):
            raise ValueError("hops must be 1 or 2")
        found = {f for f in self.facts_of(entity) if is_temporal_fact(f)}
        if hops == 2:
            for nb in self.entity_neighbors(entity):
                found |= {f for f in self.facts_of(nb) if is_temporal_fact(f)}
        return found

    def shortest_paths(self, e1: str, e2: str) -> set[Path]:
        """All minimum-length fact paths between two items, undirected.

        Two items are adjacent when they co-occur in a fact; path length is
        the number of facts.  Zero-length paths (e1 == e2) are excluded.
        """
        self.item(e1)
        self.item(e2)
        if e1 == e2:
            return set()
        # BFS over items, stepping through facts.
        dist: dict[str, int] = {e1: 0}
        # (item -> list of (prev item, fact id)) along shortest paths
        preds: dict[str, list[tuple[str, str]]] = {}
        frontier = deque([e1])
        while frontier and e2 not in dist:
            layer = {}
            for _ in range(len(frontier)):
                cur = frontier.popleft()
                for fid in self.index.get(cur, ()):
                    for it in self.facts[fid].items():
                        nxt = it.id
                        if nxt == cur or nxt in dist:
                            continue
                        if nxt not in layer:
                            layer[nxt] = []
                        layer[nxt].append((cur, fid))
            for nxt, entries in layer.items():
                dist[nxt] = dist[next(iter(entries))[0]] + 1
                preds[nxt] = entries
                frontier.append(nxt)
        if e2 not in dist:
            return set()

        sequences: set[tuple[str, ...]] = set()

        def walk(node: str, suffix: tuple[str, ...]):
            if node == e1:
                sequences.add(suffix)
                return
            for prev, fid in preds[node]:
                walk(prev, (fid,) + suffix)

        walk(e2, ())
        return {Path(seq, (e1, e2)) for seq in sequences}


def is_temporal_fact(f: Fact) -> bool:
    """True iff the main object or any qualifier object is a timestamp."""
    return any(o.kind == "timestamp" for o in f.objects())


def _render_item(it: Item) -> str:
    if it.kind == "timestamp" and it.timestamp is not None:
        return it.timestamp.render()
    return it.label


def verbalize_fact(f: Fact) -> str:
    """'subject predicate object and qpred qobj and ...' terminated by a period."""
    parts = [_render_item(f.subject), _render_item(f.predicate), _render_item(f.object)]
    for qp, qo in f.qualifiers:
        parts.extend(("and", _render_item(qp), _render_item(qo)))
    return " ".join(parts) + "."


def verbalize_path(p: Path, kg: KnowledgeGraph) -> str:
    return " ".join(verbalize_fact(kg.facts[fid]) for fid in p.facts)


def _item_from_record(rec: dict, line: int) -> Item:
    try:
        ts = Timestamp.parse(rec["timestamp"]) if rec.get("timestamp") else None
        label = rec.get("label")
        if label is None and ts is not None:
            label = ts.render()
        if label is None:
            raise KeyError("label")
        return Item(
            id=rec["id"],
            label=label,
            kind=rec["kind"],
            aliases=frozenset(rec.get("aliases", [])),
            timestamp=ts,
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise ParseError(f"bad item record: {exc}", line) from exc


def load_kg(items_stream: Iterable[str], facts_stream: Iterable[str]) -> KnowledgeGraph:
    """Load a KG from JSON-lines item and fact streams.

    Item record:  {"id", "label", "kind", "aliases": [...], "timestamp": "YYYY[-MM[-DD]]"}
    Fact record:  {"id", "subject", "predicate", "object", "qualifiers": [[qp, qo], ...]}
    """
    kg = KnowledgeGraph()
    for line_no, line in enumerate(items_stream, 1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad JSON: {exc}", line_no) from exc
        item = _item_from_record(rec, line_no)
        if item.id in kg.items:
            raise ConflictError(f"duplicate item id: {item.id}")
        kg.items[item.id] = item

    def ref(item_id, line):
        try:
            return kg.items[item_id]
        except KeyError:
            raise ParseError(f"unknown item referenced: {item_id}", line) from None

    for line_no, line in enumerate(facts_stream, 1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad JSON: {exc}", line_no) from exc
        try:
            fact = Fact(
                id=rec["id"],
                subject=ref(rec["subject"], line_no),
                predicate=ref(rec["predicate"], line_no),
                object=ref(rec["object"], line_no),
                qualifiers=tuple(
                    (ref(qp, line_no), ref(qo, line_no))
                    for qp, qo in rec.get("qualifiers", [])
                ),
            )
        except (KeyError, ValueError, TypeError) as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"bad fact record: {exc}", line_no) from exc
        if fact.id in kg.facts:
            raise ConflictError(f"duplicate fact id: {fact.id}")
        kg.facts[fact.id] = fact
        for it in fact.items():
            kg.index.setdefault(it.id, set()).add(fact.id)
    return kg


def load_kg_files(items_path: str, facts_path: str) -> KnowledgeGraph:
    with open(items_path, encoding="utf-8") as items_f, open(
        facts_path, encoding="utf-8"
    ) as facts_f:
        return load_kg(items_f, facts_f)


def dump_kg(kg: KnowledgeGraph, items_out: TextIO, facts_out: TextIO) -> None:
    """Inverse of load_kg; load(dump(kg)) is the identity."""
    for item_id in sorted(kg.items):
        it = kg.items[item_id]
        rec = {"id": it.id, "label": it.label, "kind": it.kind,
               "aliases": sorted(it.aliases)}
        if it.timestamp is not None:
            rec["timestamp"] = it.timestamp.isoformat()
        items_out.write(json.dumps(rec, sort_keys=True) + "\n")
    for fact_id in sorted(kg.facts):
        f = kg.facts[fact_id]
        rec = {
            "id": f.id,
            "subject": f.subject.id,
            "predicate": f.predicate.id,
            "object": f.object.id,
            "qualifiers": [[qp.id, qo.id] for qp, qo in f.qualifiers],
        }
        facts_out.write(json.dumps(rec, sort_keys=True) + "\n")


def dump_kg_files(kg: KnowledgeGraph, items_path: str, facts_path: str) -> None:
    with open(items_path, "w", encoding="utf-8") as items_f, open(
        facts_path, "w", encoding="utf-8"
    ) as facts_f:
        dump_kg(kg, items_f, facts_f)
