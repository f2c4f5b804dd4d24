"""Exact top-k Group Steiner Trees by best-first dynamic programming.

States are (root node, subset of covered groups).  Partial trees grow by one
edge or merge with another partial tree at the same root; up to `state_cap`
best entries are kept per state.  Entries pop in non-decreasing cost order,
so the first k distinct full-cover trees are the k cheapest.

The candidate space is the set of reduced trees: connected acyclic subgraphs
covering at least one member of every group, in which every leaf belongs to
some group.  Any other covering tree strictly contains a cheaper reduced one.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from itertools import combinations
from typing import Hashable, Iterable, Sequence

NodeId = Hashable
EdgeId = Hashable


@dataclass(frozen=True)
class SteinerTree:
    nodes: frozenset
    edges: tuple  # edge ids, sorted
    cost: float
    covered: tuple  # one chosen member per group, in group order


class GstGraph:
    """Undirected multigraph view used by the DP."""

    def __init__(self, edges: Iterable[tuple[EdgeId, NodeId, NodeId, float]]):
        self.edges: dict[EdgeId, tuple[NodeId, NodeId, float]] = {}
        self.adj: dict[NodeId, list[tuple[EdgeId, NodeId, float]]] = {}
        for eid, u, v, cost in edges:
            if eid in self.edges:
                raise ValueError(f"duplicate edge id: {eid}")
            if not 0.0 <= cost <= 1.0 + 1e-12:
                raise ValueError(f"edge {eid}: cost {cost} outside [0, 1]")
            if u == v:
                continue  # self-loops never belong to a tree
            self.edges[eid] = (u, v, cost)
            self.adj.setdefault(u, []).append((eid, v, cost))
            self.adj.setdefault(v, []).append((eid, u, cost))

    @property
    def nodes(self) -> set:
        return set(self.adj)


def _chosen_members(nodes: frozenset, groups: Sequence[frozenset]) -> tuple:
    return tuple(min(nodes & g, key=str) for g in groups)


def compute_gst_topk(
    graph: GstGraph,
    groups: Sequence[frozenset],
    k: int = 25,
    state_cap: int | None = None,
) -> list[SteinerTree]:
    """The k cheapest distinct group Steiner trees, cost non-decreasing.

    Equal-cost ties order by the sorted edge-id sequence.  Returns [] when no
    tree can cover every group.
    """
    if not groups:
        raise ValueError("groups must be nonempty")
    if k < 1:
        raise ValueError("k must be >= 1")
    # Non-collectable entries (dangling non-terminal roots) share state slots
    # with collectable ones, so the per-state buffer is kept wider than k.
    cap = state_cap if state_cap is not None else 2 * k + 4

    all_nodes = graph.nodes | {n for g in groups for n in g}
    full_mask = (1 << len(groups)) - 1
    node_mask = {
        n: sum(1 << i for i, g in enumerate(groups) if n in g) for n in all_nodes
    }

    # Heap entries: (cost, edge_key, root_key, mask, root, edges, nodes).
    heap: list = []
    counter = 0

    def push(cost, root, mask, edges: frozenset, nodes: frozenset):
        nonlocal counter
        edge_key = tuple(sorted(edges, key=str))
        heapq.heappush(heap, (cost, edge_key, str(root), mask, counter, root, edges, nodes))
        counter += 1

    for n in sorted(all_nodes, key=str):
        mask = node_mask[n]
        if mask:
            push(0.0, n, mask, frozenset(), frozenset([n]))

    committed: dict[tuple, list[tuple[float, frozenset, frozenset]]] = {}
    by_root: dict[NodeId, list[tuple[float, int, frozenset, frozenset]]] = {}
    results: list[SteinerTree] = []
    seen_trees: set[frozenset] = set()

    while heap and len(results) < k:
        cost, _edge_key, _rk, mask, _cnt, root, edges, nodes = heapq.heappop(heap)
        state = (root, mask)
        entries = committed.setdefault(state, [])
        if len(entries) >= cap or any(edges == e for _, e, _ in entries):
            continue
        entries.append((cost, edges, nodes))

        # Collect only reduced trees: a root that is a dangling non-terminal
        # leaf would be deletable, and the same tree is reachable rooted at
        # one of its terminal leaves.
        root_degree = sum(
            1 for eid in edges if root in graph.edges[eid][:2]
        )
        reduced = node_mask[root] != 0 or root_degree >= 2
        tree_key = (edges, nodes) if not edges else edges
        if mask == full_mask and reduced and tree_key not in seen_trees:
            seen_trees.add(tree_key)
            results.append(
                SteinerTree(
                    nodes=nodes,
                    edges=tuple(sorted(edges, key=str)),
                    cost=cost,
                    covered=_chosen_members(nodes, groups),
                )
            )

        # Grow: attach one edge at the root, making its far end the new root.
        for eid, other, ecost in graph.adj.get(root, ()):
            if other in nodes:
                continue
            push(
                cost + ecost,
                other,
                mask | node_mask[other],
                edges | {eid},
                nodes | {other},
            )

        # Merge with previously committed entries sharing only the root.
        for ocost, omask, oedges, onodes in by_root.get(root, ()):
            if (nodes & onodes) != {root}:
                continue
            push(cost + ocost, root, mask | omask, edges | oedges, nodes | onodes)
        by_root.setdefault(root, []).append((cost, mask, edges, nodes))

    return results


def min_gst_cost(graph: GstGraph, groups: Sequence[frozenset]) -> float | None:
    trees = compute_gst_topk(graph, groups, k=1)
    return trees[0].cost if trees else None


def brute_force_trees(
    graph: GstGraph, groups: Sequence[frozenset]
) -> list[tuple[float, tuple]]:
    """Oracle: every reduced covering tree by exhaustive enumeration.

    Returns (cost, sorted edge ids) sorted by (cost, edge ids).  Tractable
    only for small graphs; used to validate the DP in tests.
    """
    nodes = sorted(graph.nodes | {n for g in groups for n in g}, key=str)
    out: list[tuple[float, tuple]] = []
    seen: set[frozenset] = set()

    # Zero-edge trees: single nodes covering every group.
    for n in nodes:
        if all(n in g for g in groups):
            out.append((0.0, ()))

    for size in range(2, len(nodes) + 1):
        for subset in combinations(nodes, size):
            sset = set(subset)
            inner = [
                (eid, u, v, c)
                for eid, (u, v, c) in graph.edges.items()
                if u in sset and v in sset
            ]
            if len(inner) < size - 1:
                continue
            for tree_edges in combinations(inner, size - 1):
                # Spanning-tree check by union-find over the subset.
                parent = {n: n for n in subset}

                def find(x):
                    while parent[x] != x:
                        parent[x] = parent[parent[x]]
                        x = parent[x]
                    return x

                ok = True
                for _, u, v, _ in tree_edges:
                    ru, rv = find(u), find(v)
                    if ru == rv:
                        ok = False
                        break
                    parent[ru] = rv
                if not ok:
                    continue
                # Coverage and reduced-leaf condition.
                if not all(sset & g for g in groups):
                    continue
                degree = {n: 0 for n in subset}
                for _, u, v, _ in tree_edges:
                    degree[u] += 1
                    degree[v] += 1
                terminal_nodes = {n for n in subset if any(n in g for g in groups)}
                if any(d <= 1 and n not in terminal_nodes for n, d in degree.items()):
                    continue
                eids = frozenset(e[0] for e in tree_edges)
                if eids in seen:
                    continue
                seen.add(eids)
                out.append((sum(e[3] for e in tree_edges), tuple(sorted(eids, key=str))))
    out.sort(key=lambda t: (t[0], t[1]))
    return out
