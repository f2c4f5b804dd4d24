import random

import pytest
from hypothesis import given, settings, strategies as st

from tempoqa.gst import GstGraph, brute_force_trees, compute_gst_topk, min_gst_cost


def random_instance(rng, max_nodes=12, max_edges=18, max_groups=3, max_members=3):
    n = rng.randint(2, max_nodes)
    nodes = [f"n{i}" for i in range(n)]
    edges = []
    for eid in range(rng.randint(1, max_edges)):
        u, v = rng.sample(nodes, 2)
        edges.append((f"e{eid}", u, v, round(rng.random(), 6)))
    graph = GstGraph(edges)
    groups = []
    for _ in range(rng.randint(1, max_groups)):
        members = rng.sample(nodes, rng.randint(1, min(max_members, len(nodes))))
        groups.append(frozenset(members))
    return graph, groups


class TestGraph:
    def test_duplicate_edge_id_rejected(self):
        with pytest.raises(ValueError):
            GstGraph([("e", "a", "b", 0.1), ("e", "b", "c", 0.2)])

    def test_cost_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            GstGraph([("e", "a", "b", 1.5)])

    def test_self_loops_dropped(self):
        g = GstGraph([("e", "a", "a", 0.1), ("f", "a", "b", 0.2)])
        assert set(g.edges) == {"f"}


class TestSmallCases:
    def test_single_node_tree(self):
        g = GstGraph([("e", "a", "b", 0.5)])
        trees = compute_gst_topk(g, [frozenset({"a"})], k=1)
        assert trees[0].cost == 0.0
        assert trees[0].nodes == frozenset({"a"})
        assert trees[0].edges == ()

    def test_two_groups_bridge(self):
        g = GstGraph(
            [("e1", "a", "m", 0.3), ("e2", "m", "b", 0.2), ("e3", "a", "b", 0.9)]
        )
        trees = compute_gst_topk(g, [frozenset({"a"}), frozenset({"b"})], k=2)
        assert [t.cost for t in trees] == pytest.approx([0.5, 0.9])
        assert trees[0].edges == ("e1", "e2")

    def test_group_choice_picks_cheaper_member(self):
        g = GstGraph([("e1", "a", "b", 0.1), ("e2", "a", "c", 0.8)])
        (tree,) = compute_gst_topk(g, [frozenset({"a"}), frozenset({"b", "c"})], k=1)
        assert tree.covered == ("a", "b")

    def test_unreachable_group_member_stands_alone(self):
        # A group member absent from the edge set is an isolated node: it can
        # only appear as a zero-edge tree, never connect to other groups.
        g = GstGraph([("e", "a", "b", 0.1)])
        (tree,) = compute_gst_topk(g, [frozenset({"zz"})], k=3)
        assert (tree.cost, tree.edges, tree.nodes) == (0.0, (), frozenset({"zz"}))
        assert compute_gst_topk(g, [frozenset({"a"}), frozenset({"zz"})], k=3) == []

    def test_disconnected_groups_return_empty(self):
        g = GstGraph([("e1", "a", "b", 0.1), ("e2", "c", "d", 0.1)])
        assert compute_gst_topk(g, [frozenset({"a"}), frozenset({"c"})], k=1) == []

    def test_rejects_bad_arguments(self):
        g = GstGraph([("e", "a", "b", 0.1)])
        with pytest.raises(ValueError):
            compute_gst_topk(g, [], k=1)
        with pytest.raises(ValueError):
            compute_gst_topk(g, [frozenset({"a"})], k=0)


class TestAgainstOracle:
    def test_min_cost_matches_oracle_100_instances(self):
        rng = random.Random(5)
        for _ in range(100):
            graph, groups = random_instance(rng)
            oracle = brute_force_trees(graph, groups)
            got = min_gst_cost(graph, groups)
            if not oracle:
                assert got is None
            else:
                assert got == pytest.approx(oracle[0][0], abs=1e-9)

    def test_topk_matches_oracle(self):
        rng = random.Random(6)
        for _ in range(60):
            graph, groups = random_instance(rng, max_nodes=8, max_edges=12)
            oracle = brute_force_trees(graph, groups)
            trees = compute_gst_topk(graph, groups, k=5)
            assert len(trees) == min(5, len(oracle))
            for tree, (cost, _) in zip(trees, oracle[:5]):
                assert tree.cost == pytest.approx(cost, abs=1e-9)
            # Non-decreasing costs, distinct edge sets.
            costs = [t.cost for t in trees]
            assert costs == sorted(costs)
            edge_sets = [t.edges for t in trees if t.edges]
            assert len(edge_sets) == len(set(edge_sets))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10**9))
    def test_trees_are_connected_and_cover(self, seed):
        rng = random.Random(seed)
        graph, groups = random_instance(rng, max_nodes=9, max_edges=14)
        for tree in compute_gst_topk(graph, groups, k=4):
            assert all(tree.nodes & g for g in groups)
            assert len(tree.edges) == len(tree.nodes) - 1  # acyclic + connected
            assert tree.cost == pytest.approx(
                sum(graph.edges[e][2] for e in tree.edges)
            )
