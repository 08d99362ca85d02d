"""Multiplex item graph built from session co-occurrence.

Two undirected edge types connect items that appeared in the same session:
co_bought when both were purchased, co_atc when both reached the cart (a
purchase counts as carted, since checkouts pass through the cart). Edges
are only admitted between items of the same product category, so the graph
decomposes into per-category sub-graphs. Co-occurrence counts are kept as
edge weights but walk generation treats edges as unweighted.

Node rows are assigned in ascending item-id order, which makes every
derived artifact independent of input file ordering.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError
from .ingest import AspectAnnotation, CatalogItem, SessionEvent

EDGE_TYPES = ("co_bought", "co_atc")


def _ordered(u: str, v: str) -> tuple[str, str]:
    return (u, v) if u < v else (v, u)


class MultiplexGraph:
    """Immutable item graph with one adjacency per edge type."""

    def __init__(self, categories: Mapping[str, str],
                 edges: Mapping[str, Mapping[tuple[str, str], int]]):
        self._category = dict(categories)
        self.node_ids: tuple[str, ...] = tuple(sorted(self._category))
        self._row = {nid: i for i, nid in enumerate(self.node_ids)}
        self.edge_types = EDGE_TYPES
        self._edges: dict[str, dict[tuple[str, str], int]] = {}
        self._adjacency: dict[str, list[np.ndarray]] = {}
        for etype in EDGE_TYPES:
            bucket = dict(edges.get(etype, {}))
            for (u, v), w in bucket.items():
                if u == v:
                    raise DataError(f"self edge on {u!r}")
                if u not in self._row or v not in self._row:
                    raise DataError(f"edge endpoint not a node: {(u, v)!r}")
                if self._category[u] != self._category[v]:
                    raise DataError(f"cross-category edge {(u, v)!r}")
                if w <= 0:
                    raise DataError(f"non-positive edge weight on {(u, v)!r}")
            self._edges[etype] = bucket
            neighbor_sets: list[list[int]] = [[] for _ in self.node_ids]
            for (u, v) in bucket:
                neighbor_sets[self._row[u]].append(self._row[v])
                neighbor_sets[self._row[v]].append(self._row[u])
            self._adjacency[etype] = [
                np.array(sorted(ns), dtype=np.int64) for ns in neighbor_sets
            ]

    @property
    def num_nodes(self) -> int:
        return len(self.node_ids)

    def row(self, node_id: str) -> int:
        return self._row[node_id]

    def __contains__(self, node_id: str) -> bool:
        return node_id in self._row

    def category(self, node_id: str) -> str:
        return self._category[node_id]

    def neighbor_rows(self, row: int, edge_type: str) -> np.ndarray:
        """Ascending row indices adjacent to `row` under `edge_type`."""
        return self._adjacency[edge_type][row]

    def neighbors(self, node_id: str, edge_type: str) -> tuple[str, ...]:
        rows = self._adjacency[edge_type][self._row[node_id]]
        return tuple(self.node_ids[r] for r in rows)

    def degree(self, node_id: str, edge_type: str | None = None) -> int:
        """Neighbor count under one edge type, or distinct neighbors overall."""
        r = self._row[node_id]
        if edge_type is not None:
            return len(self._adjacency[edge_type][r])
        merged = set()
        for etype in EDGE_TYPES:
            merged.update(self._adjacency[etype][r].tolist())
        return len(merged)

    def edge_weight(self, u: str, v: str, edge_type: str) -> int:
        return self._edges[edge_type].get(_ordered(u, v), 0)

    def edge_count(self, edge_type: str) -> int:
        return len(self._edges[edge_type])

    def edge_pairs(self, edge_type: str) -> list[tuple[str, str]]:
        return sorted(self._edges[edge_type])

    def edge_rows(self, edge_type: str) -> list[tuple[int, int, int]]:
        """Edges as (row u, row v, weight), u < v, sorted, for serialization."""
        out = []
        for (u, v), w in self._edges[edge_type].items():
            ru, rv = self._row[u], self._row[v]
            out.append((min(ru, rv), max(ru, rv), w))
        return sorted(out)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MultiplexGraph):
            return NotImplemented
        return self._category == other._category and self._edges == other._edges


@dataclass
class GraphBuildReport:
    graph: MultiplexGraph
    dropped_items: int
    dropped_ids: set[str] = field(default_factory=set)


def build_graph(events: Sequence[SessionEvent], catalog: Mapping[str, CatalogItem],
                extra_nodes: Iterable[str] = ()) -> GraphBuildReport:
    """Build the multiplex graph from session co-occurrence.

    For every unordered item pair sharing a session and a category: a
    co_bought edge if both were purchased, a co_atc edge if both were
    carted (purchases imply carting). Items absent from the catalog are
    dropped and counted. `extra_nodes` admits catalog items that should
    exist as nodes even without any session edges, e.g. aspect-bearing
    items that embeddings must cover.
    """
    dropped_ids: set[str] = set()
    carted: dict[str, set[str]] = {}
    purchased: dict[str, set[str]] = {}
    nodes: set[str] = set()
    for ev in events:
        if ev.item_id not in catalog:
            dropped_ids.add(ev.item_id)
            continue
        nodes.add(ev.item_id)
        carted.setdefault(ev.session_id, set()).add(ev.item_id)
        if ev.kind == "purchase":
            purchased.setdefault(ev.session_id, set()).add(ev.item_id)
    for nid in extra_nodes:
        if nid in catalog:
            nodes.add(nid)
        else:
            dropped_ids.add(nid)

    counts: dict[str, dict[tuple[str, str], int]] = {etype: {} for etype in EDGE_TYPES}

    def tally(bucket: dict[tuple[str, str], int], members: set[str]) -> None:
        ordered = sorted(members)
        for i, u in enumerate(ordered):
            for v in ordered[i + 1:]:
                if catalog[u].category != catalog[v].category:
                    continue
                key = (u, v)
                bucket[key] = bucket.get(key, 0) + 1

    for session_id in sorted(carted):
        tally(counts["co_atc"], carted[session_id])
        tally(counts["co_bought"], purchased.get(session_id, set()))

    categories = {nid: catalog[nid].category for nid in nodes}
    graph = MultiplexGraph(categories, counts)
    return GraphBuildReport(graph=graph, dropped_items=len(dropped_ids),
                            dropped_ids=dropped_ids)


@dataclass(frozen=True)
class NodeSets:
    v_a: frozenset[str]
    v_b: frozenset[str]
    anchors: frozenset[str]


def node_sets(events: Sequence[SessionEvent],
              aspects: Mapping[str, Sequence[AspectAnnotation]],
              anchor_rule: Callable[[str], bool] | None = None) -> NodeSets:
    """Derive the interacted set, the aspect-bearing set, and the anchors.

    v_a holds every item with at least one session event, v_b exactly the
    key set of the aspect annotations. Anchors are the v_a items passing
    `anchor_rule` (all of v_a when no rule is given).
    """
    v_a = frozenset(ev.item_id for ev in events)
    v_b = frozenset(aspects)
    if anchor_rule is None:
        anchors = v_a
    else:
        anchors = frozenset(i for i in v_a if anchor_rule(i))
    return NodeSets(v_a=v_a, v_b=v_b, anchors=anchors)


def degree_anchor_rule(graph: MultiplexGraph, min_degree: int) -> Callable[[str], bool]:
    """Default anchor rule: in-graph items with overall degree >= min_degree."""

    def rule(item_id: str) -> bool:
        return item_id in graph and graph.degree(item_id) >= min_degree

    return rule
