import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import annotation, make_catalog, session
from dts.errors import DataError
from dts.graph import (EDGE_TYPES, MultiplexGraph, build_graph,
                       degree_anchor_rule, node_sets)


class TestBuildGraph:
    def test_same_category_purchase_creates_both_edges(self):
        catalog = make_catalog([("A", "c1"), ("B", "c1")])
        events = session("s1", ["A", "B"], kind="purchase")
        g = build_graph(events, catalog).graph
        assert g.edge_weight("A", "B", "co_bought") == 1
        # a purchase passes through the cart
        assert g.edge_weight("A", "B", "co_atc") == 1

    def test_cross_category_pair_gets_no_edges(self):
        catalog = make_catalog([("A", "c1"), ("B", "c2")])
        g = build_graph(session("s1", ["A", "B"]), catalog).graph
        assert g.edge_count("co_bought") == 0
        assert g.edge_count("co_atc") == 0

    def test_single_item_session_has_no_edges(self):
        catalog = make_catalog([("A", "c1")])
        g = build_graph(session("s1", ["A"]), catalog).graph
        assert g.edge_count("co_bought") == 0

    def test_cart_only_session_gets_only_atc_edge(self):
        catalog = make_catalog([("A", "c1"), ("B", "c1")])
        g = build_graph(session("s1", ["A", "B"], kind="add_to_cart"), catalog).graph
        assert g.edge_weight("A", "B", "co_atc") == 1
        assert g.edge_weight("A", "B", "co_bought") == 0

    def test_unknown_items_dropped_and_counted(self):
        catalog = make_catalog([("A", "c1")])
        report = build_graph(session("s1", ["A", "ghost"]), catalog)
        assert report.dropped_items == 1
        assert "ghost" not in report.graph

    def test_repeat_sessions_accumulate_weight_not_edges(self):
        catalog = make_catalog([("A", "c1"), ("B", "c1")])
        events = session("s1", ["A", "B"]) + session("s2", ["A", "B"], t0=2000)
        g = build_graph(events, catalog).graph
        assert g.edge_count("co_bought") == 1
        assert g.edge_weight("A", "B", "co_bought") == 2

    def test_same_item_twice_in_session_is_not_a_self_edge(self):
        catalog = make_catalog([("A", "c1")])
        events = session("s1", ["A", "A"])
        g = build_graph(events, catalog).graph
        assert g.edge_count("co_bought") == 0

    def test_extra_nodes_become_isolated_nodes(self):
        catalog = make_catalog([("A", "c1"), ("Z", "c1")])
        g = build_graph(session("s1", ["A"]), catalog, extra_nodes=["Z"]).graph
        assert "Z" in g
        assert g.degree("Z") == 0

    def test_order_invariance(self, rng):
        catalog = make_catalog([(f"i{k}", f"c{k % 2}") for k in range(10)])
        events = []
        for s in range(8):
            members = rng.choice(10, size=3, replace=False)
            events.extend(session(f"s{s}", [f"i{k}" for k in members],
                                  kind="purchase" if s % 2 else "add_to_cart"))
        permuted = [events[i] for i in rng.permutation(len(events))]
        assert build_graph(events, catalog).graph == build_graph(permuted, catalog).graph

    def test_edge_count_bounded_by_session_pairs(self, rng):
        catalog = make_catalog([(f"i{k}", "c") for k in range(12)])
        events = []
        bound = 0
        for s in range(10):
            size = int(rng.integers(2, 6))
            members = rng.choice(12, size=size, replace=False)
            events.extend(session(f"s{s}", [f"i{k}" for k in members]))
            bound += size * (size - 1) // 2
        g = build_graph(events, catalog).graph
        for etype in EDGE_TYPES:
            assert g.edge_count(etype) <= bound

    def test_every_edge_shares_category(self, rng):
        catalog = make_catalog([(f"i{k}", f"c{k % 3}") for k in range(15)])
        events = []
        for s in range(20):
            members = rng.choice(15, size=4, replace=False)
            events.extend(session(f"s{s}", [f"i{k}" for k in members]))
        g = build_graph(events, catalog).graph
        for etype in EDGE_TYPES:
            for u, v in g.edge_pairs(etype):
                assert g.category(u) == g.category(v)


class TestMultiplexGraph:
    def test_rejects_cross_category_edge(self):
        with pytest.raises(DataError, match="cross-category"):
            MultiplexGraph({"a": "c1", "b": "c2"},
                           {"co_bought": {("a", "b"): 1}})

    def test_rejects_self_edge(self):
        with pytest.raises(DataError, match="self edge"):
            MultiplexGraph({"a": "c1"}, {"co_bought": {("a", "a"): 1}})

    def test_neighbors_sorted_by_id(self):
        g = MultiplexGraph({"a": "c", "b": "c", "z": "c"},
                           {"co_bought": {("b", "z"): 1, ("a", "z"): 1}})
        assert g.neighbors("z", "co_bought") == ("a", "b")

    def test_rows_follow_sorted_ids(self):
        g = MultiplexGraph({"z": "c", "a": "c", "m": "c"}, {})
        assert g.node_ids == ("a", "m", "z")
        assert [g.row(i) for i in g.node_ids] == [0, 1, 2]


class TestNodeSets:
    def test_event_item_without_aspects_in_va_only(self):
        sets = node_sets(session("s", ["A"]), {})
        assert "A" in sets.v_a
        assert "A" not in sets.v_b

    def test_aspect_item_without_events_in_vb_only(self):
        sets = node_sets([], {"B": [annotation("B", "soft")]})
        assert "B" in sets.v_b
        assert "B" not in sets.v_a

    def test_empty_inputs_empty_sets(self):
        sets = node_sets([], {})
        assert not sets.v_a and not sets.v_b and not sets.anchors

    def test_vb_equals_aspect_key_set(self):
        aspects = {f"i{k}": [annotation(f"i{k}", "a")] for k in range(7)}
        sets = node_sets([], aspects)
        assert sets.v_b == frozenset(aspects)

    def test_anchor_rule_filters_va(self):
        catalog = make_catalog([("A", "c"), ("B", "c"), ("C", "c")])
        events = session("s1", ["A", "B"]) + session("s2", ["C"])
        graph = build_graph(events, catalog).graph
        sets = node_sets(events, {}, degree_anchor_rule(graph, 1))
        assert sets.anchors == frozenset({"A", "B"})
        assert sets.anchors <= sets.v_a


@settings(max_examples=30, deadline=None)
@given(st.data())
def test_build_graph_order_invariant_property(data):
    catalog = make_catalog([(f"i{k}", f"c{k % 2}") for k in range(8)])
    sessions = data.draw(st.lists(
        st.tuples(st.lists(st.integers(0, 7), min_size=1, max_size=4),
                  st.booleans()),
        min_size=0, max_size=6))
    events = []
    for s, (members, purchased) in enumerate(sessions):
        events.extend(session(f"s{s}", [f"i{k}" for k in members],
                              kind="purchase" if purchased else "add_to_cart"))
    perm = data.draw(st.permutations(events))
    assert build_graph(events, catalog).graph == build_graph(perm, catalog).graph
