"""Stage-1 engine: induce a labeled graph from selected facts, inject
connectivity, match terminal groups, run the GST per component, complete the
trees and augment with temporal facts.

Entity/literal/type/timestamp nodes are keyed by item id and merged across
facts; predicate nodes are one per fact occurrence so that qualifier chains
of different facts stay distinct.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .gst import GstGraph, SteinerTree, compute_gst_topk
from .kg import Fact, KnowledgeGraph
from .question import QuestionAnalysis, content_keywords
from .relevance import RelevanceScorer, ScoredFact, score_fact, score_path

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Node:
    id: str
    item_id: str
    kind: str


@dataclass(frozen=True)
class Edge:
    id: str
    src: str
    dst: str
    cost: float
    fact_id: str


@dataclass(frozen=True)
class TerminalGroup:
    keyword: str
    members: frozenset[str]


@dataclass
class AnswerGraph:
    nodes: dict[str, Node] = field(default_factory=dict)
    edges: dict[str, Edge] = field(default_factory=dict)
    fact_costs: dict[str, float] = field(default_factory=dict)

    def _merge_node(self, node_id: str, item_id: str, kind: str) -> str:
        if node_id not in self.nodes:
            self.nodes[node_id] = Node(node_id, item_id, kind)
        return node_id

    def add_fact(self, fact: Fact, cost: float) -> None:
        """Idempotent: re-adding a fact changes nothing."""
        if not 0.0 <= cost <= 1.0:
            raise ValueError(f"fact {fact.id}: cost {cost} outside [0, 1]")
        self.fact_costs.setdefault(fact.id, cost)
        cost = self.fact_costs[fact.id]
        s = self._merge_node(fact.subject.id, fact.subject.id, "entity")
        p = self._merge_node(f"{fact.id}|p", fact.predicate.id, "predicate")
        o = self._merge_node(fact.object.id, fact.object.id, fact.object.kind)
        chain = [(s, p), (p, o)]
        for i, (qp, qo) in enumerate(fact.qualifiers):
            qp_node = self._merge_node(f"{fact.id}|q{i}", qp.id, "predicate")
            qo_node = self._merge_node(qo.id, qo.id, qo.kind)
            chain.append((p, qp_node))
            chain.append((qp_node, qo_node))
        for j, (src, dst) in enumerate(chain):
            eid = f"{fact.id}:{j}"
            self.edges.setdefault(eid, Edge(eid, src, dst, cost, fact.id))

    def fact_ids(self) -> set[str]:
        return {e.fact_id for e in self.edges.values()}

    def entity_node_ids(self) -> list[str]:
        return sorted(n.id for n in self.nodes.values() if n.kind == "entity")

    def candidate_count(self) -> int:
        """Entities plus literals (timestamps counted as literals)."""
        return sum(
            1 for n in self.nodes.values() if n.kind in ("entity", "literal", "timestamp")
        )

    def contains_item(self, item_id: str) -> bool:
        return any(n.item_id == item_id for n in self.nodes.values())

    def components(self) -> list[frozenset[str]]:
        """Connected components of the undirected view, largest first; ties
        ordered by smallest node id."""
        adj: dict[str, set[str]] = {n: set() for n in self.nodes}
        for e in self.edges.values():
            adj[e.src].add(e.dst)
            adj[e.dst].add(e.src)
        seen: set[str] = set()
        comps = []
        for start in sorted(self.nodes):
            if start in seen:
                continue
            stack, comp = [start], set()
            while stack:
                cur = stack.pop()
                if cur in comp:
                    continue
                comp.add(cur)
                stack.extend(adj[cur] - comp)
            seen |= comp
            comps.append(frozenset(comp))
        comps.sort(key=lambda c: (-len(c), min(c)))
        return comps

    def to_gst_graph(self, restrict: frozenset[str] | None = None) -> GstGraph:
        edges = [
            (e.id, e.src, e.dst, e.cost)
            for e in sorted(self.edges.values(), key=lambda e: e.id)
            if restrict is None or (e.src in restrict and e.dst in restrict)
        ]
        return GstGraph(edges)


FactCost = Callable[[Fact], float]


def scorer_fact_cost(question: str, scorer: RelevanceScorer) -> FactCost:
    """Per-fact cost = 1 - relevance score, cached by fact id."""
    cache: dict[str, float] = {}

    def cost(f: Fact) -> float:
        if f.id not in cache:
            cache[f.id] = 1.0 - score_fact(question, f, scorer)
        return cache[f.id]

    return cost


def induce_graph(
    scored: Sequence[ScoredFact], kg: KnowledgeGraph
) -> AnswerGraph:
    if not scored:
        raise ValueError("scored fact list must be nonempty")
    g = AnswerGraph()
    for sf in scored:
        g.add_fact(kg.facts[sf.fact_id], sf.cost)
    return g


def inject_connectivity(
    g: AnswerGraph,
    question: str,
    question_entities: Iterable[str],
    kg: KnowledgeGraph,
    scorer,
    fact_cost: FactCost,
) -> AnswerGraph:
    """Add the best shortest KG path between every pair of question entities.

    Ties among equal-length paths break by path score, then by fact-id
    sequence for determinism.  Disconnected pairs are skipped with a log line.
    """
    entities = sorted(set(question_entities))
    encoder = getattr(scorer, "encode", None)
    for i, e1 in enumerate(entities):
        for e2 in entities[i + 1 :]:
            paths = kg.shortest_paths(e1, e2)
            if not paths:
                log.info("no KG path between %s and %s; skipped", e1, e2)
                continue
            ordered = sorted(paths, key=lambda p: p.facts)
            if len(ordered) == 1 or encoder is None:
                best = ordered[0]
            else:
                best = max(ordered, key=lambda p: score_path(question, p, kg, encoder))
            for fid in best.facts:
                fact = kg.facts[fid]
                g.add_fact(fact, fact_cost(fact))
    return g


def match_terminals(qa: QuestionAnalysis, g: AnswerGraph, kg: KnowledgeGraph) -> list[TerminalGroup]:
    """One group per question entity present in the graph; one group per
    non-entity keyword matching a node label or alias (case-insensitive)."""
    groups: list[TerminalGroup] = []
    for ent in sorted(qa.entities):
        if ent in g.nodes:
            groups.append(TerminalGroup(ent, frozenset([ent])))

    # Alias index over non-entity nodes of the graph.
    alias_index: dict[str, set[str]] = {}
    for node in g.nodes.values():
        if node.kind == "entity":
            continue
        item = kg.items.get(node.item_id)
        if item is None:
            continue
        for name in {item.label, *item.aliases}:
            alias_index.setdefault(name.lower(), set()).add(node.id)

    tokens = content_keywords(qa.tokens)
    seen_keywords: set[str] = set()
    for n in (3, 2, 1):
        for i in range(len(tokens) - n + 1):
            kw = " ".join(tokens[i : i + n])
            if kw in seen_keywords:
                continue
            members = alias_index.get(kw)
            if members:
                seen_keywords.add(kw)
                groups.append(TerminalGroup(kw, frozenset(members)))
    return groups


def compute_gst_forest(
    g: AnswerGraph,
    groups: Sequence[TerminalGroup],
    k: int = 25,
    state_cap: int | None = None,
) -> list[tuple[frozenset[str], list[SteinerTree]]]:
    """Top-k GSTs per connected component, largest component first.

    Groups are restricted to members inside each component; components where
    no group has a member are skipped.
    """
    forest = []
    for comp in g.components():
        comp_groups = []
        for grp in groups:
            members = grp.members & comp
            if members:
                comp_groups.append(frozenset(members))
        if not comp_groups:
            continue
        trees = compute_gst_topk(g.to_gst_graph(comp), comp_groups, k, state_cap)
        forest.append((comp, trees))
    return forest


def complete_gsts(
    trees: Iterable[SteinerTree], g: AnswerGraph, kg: KnowledgeGraph
) -> AnswerGraph:
    """Union of the trees plus the full expansion of every provenance fact of
    g that touches any tree item."""
    item_to_facts: dict[str, set[str]] = {}
    for fid in g.fact_ids():
        for it in kg.facts[fid].items():
            item_to_facts.setdefault(it.id, set()).add(fid)

    out = AnswerGraph()
    for tree in trees:
        for node_id in tree.nodes:
            node = g.nodes[node_id]
            for fid in sorted(item_to_facts.get(node.item_id, ())):
                out.add_fact(kg.facts[fid], g.fact_costs[fid])
    return out


def augment_temporal(
    g: AnswerGraph,
    kg: KnowledgeGraph,
    question: str,
    scorer,
    fact_cost: FactCost,
    n: int = 25,
) -> AnswerGraph:
    """Add the top-n question-relevant temporal facts of the graph's entities
    (1 hop), fully expanded."""
    from .relevance import select_temporal_facts

    candidates: dict[str, Fact] = {}
    for node_id in g.entity_node_ids():
        if node_id not in kg.items:
            continue
        for f in kg.temporal_facts_of(node_id, hops=1):
            candidates[f.id] = f
    if not candidates:
        return g
    top = select_temporal_facts(
        question, [candidates[fid] for fid in sorted(candidates)], scorer, n
    )
    for sf in top:
        fact = kg.facts[sf.fact_id]
        g.add_fact(fact, fact_cost(fact))
    return g
