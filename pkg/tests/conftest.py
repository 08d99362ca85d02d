import numpy as np
import pytest

from dts.graph import EDGE_TYPES, MultiplexGraph
from dts.ingest import AspectAnnotation, CatalogItem, SessionEvent
from dts.triples import Triple


def finite_difference(loss_fn, param: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar loss w.r.t. one array."""
    grad = np.zeros_like(param)
    for i in range(param.size):
        orig = param.flat[i]
        param.flat[i] = orig + h
        up = loss_fn()
        param.flat[i] = orig - h
        down = loss_fn()
        param.flat[i] = orig
        grad.flat[i] = (up - down) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    return float(np.linalg.norm(analytic - numeric) / denom)


def random_multiplex_graph(num_nodes: int, rng: np.random.Generator,
                           edges_per_type: int = 15,
                           category: str = "cat") -> MultiplexGraph:
    ids = [f"n{i:02d}" for i in range(num_nodes)]
    edges = {}
    for etype in EDGE_TYPES:
        bucket = {}
        while len(bucket) < edges_per_type:
            u, v = rng.choice(num_nodes, size=2, replace=False)
            a, b = sorted((ids[u], ids[v]))
            bucket[(a, b)] = 1
        edges[etype] = bucket
    return MultiplexGraph({i: category for i in ids}, edges)


def make_catalog(items):
    """items: iterable of (item_id, category) or full tuples."""
    out = {}
    for spec in items:
        if len(spec) == 2:
            item_id, category = spec
            out[item_id] = CatalogItem(item_id, category, f"pt_{category}", 2, 10)
        else:
            out[spec[0]] = CatalogItem(*spec)
    return out


def session(session_id, item_ids, kind="purchase", t0=1000):
    return [SessionEvent(session_id, item, kind, t0 + i)
            for i, item in enumerate(item_ids)]


def annotation(item_id, aspect_id, asp_rel=0.8, text=None):
    text = text or aspect_id.replace("_", " ")
    return AspectAnnotation(item_id, aspect_id, text, asp_rel,
                            f"Similar items that are {text}",
                            f"Customers say these are {text}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture
def two_group_kg():
    """20-entity KG with two disjoint relation-connected groups.

    Each group of 10 items is a near-clique under product_type and
    similarity relations, so group membership is recoverable by link
    prediction.
    """
    triples = []
    for group, offset in (("g0", 0), ("g1", 10)):
        members = [f"e{offset + i:02d}" for i in range(8)]
        hub = f"pt_{group}"
        for m in members:
            triples.append(Triple(m, "product_type", hub))
        for i, a in enumerate(members):
            for b in members[i + 1:]:
                triples.append(Triple(a, "similarity", b))
                triples.append(Triple(b, "similarity", a))
    return triples
