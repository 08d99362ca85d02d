"""Calibrated synthetic dataset generator for desk-scale pipeline runs.

Items are partitioned into planted clusters (clusters_per_category per
category); sessions draw items mostly from one cluster, so the built graph
recovers the clusters, and each cluster owns a disjoint aspect pool so
cluster mates share aspects. Aspect counts per item follow a log-normal
matched to production-like statistics (mean near 8.6, heavy tail, minimum
1). Relevance judgments are cluster membership: an item is relevant to an
anchor iff they share a cluster.

Per-category child seeds keep generation reproducible and independent of
category processing order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .binio import atomic_write_text
from .errors import ConfigError

_SYNTH_TAG = 0x5E17


@dataclass
class SynthConfig:
    num_categories: int = 2
    items_per_category: int = 100
    clusters_per_category: int = 2
    sessions: int = 600
    session_size_lambda: float = 2.0     # size = min_size + Poisson(lambda)
    session_size_min: int = 2
    aspect_vocab_size: int = 600
    aspects_per_item_mean: float = 8.61
    aspects_per_item_std: float = 14.95
    aspects_per_item_min: int = 1
    aspects_per_item_max: int = 419
    mixing_rate: float = 0.05
    purchase_session_rate: float = 0.5
    similarity_pairs_per_cluster: int = 50
    seed: int = 0

    def validate(self) -> None:
        counts = (self.num_categories, self.items_per_category,
                  self.clusters_per_category, self.sessions, self.aspect_vocab_size)
        if any(c <= 0 for c in counts):
            raise ConfigError("synth counts must be positive")
        if not 0.0 <= self.mixing_rate <= 1.0:
            raise ConfigError("synth.mixing_rate must be in [0, 1]")
        if self.aspects_per_item_mean <= 0 or self.aspects_per_item_std <= 0:
            raise ConfigError("synth aspect distribution parameters must be positive")
        if self.aspect_vocab_size < self.num_categories * self.clusters_per_category:
            raise ConfigError("aspect vocabulary smaller than the cluster count")

    def lognormal_params(self) -> tuple[float, float]:
        """(mu, sigma) hitting the configured mean and std before clipping."""
        ratio = self.aspects_per_item_std / self.aspects_per_item_mean
        sigma2 = math.log(1.0 + ratio * ratio)
        mu = math.log(self.aspects_per_item_mean) - sigma2 / 2.0
        return mu, math.sqrt(sigma2)


@dataclass
class SynthData:
    sessions: list[dict] = field(default_factory=list)
    catalog: list[dict] = field(default_factory=list)
    aspects: list[dict] = field(default_factory=list)
    similarity: list[tuple[str, str]] = field(default_factory=list)
    clusters: dict[str, str] = field(default_factory=dict)   # item -> cluster label


def generate_synthetic(config: SynthConfig) -> SynthData:
    config.validate()
    root = np.random.SeedSequence([config.seed, _SYNTH_TAG])
    category_seeds = root.spawn(config.num_categories)
    session_rng = np.random.default_rng(root.spawn(1)[0])

    total_clusters = config.num_categories * config.clusters_per_category
    pool_size = config.aspect_vocab_size // total_clusters
    aspect_ids = [f"asp_{i:05d}" for i in range(config.aspect_vocab_size)]
    mu, sigma = config.lognormal_params()

    data = SynthData()
    cluster_items: dict[str, list[str]] = {}
    item_counter = 0
    for c in range(config.num_categories):
        rng = np.random.default_rng(category_seeds[c])
        category = f"cat{c}"
        for local in range(config.items_per_category):
            k = local % config.clusters_per_category
            cluster = f"{category}_k{k}"
            item_id = f"item_{item_counter:06d}"
            item_counter += 1
            cluster_items.setdefault(cluster, []).append(item_id)
            data.clusters[item_id] = cluster
            data.catalog.append({
                "item_id": item_id,
                "category": category,
                "product_type": f"ptype_{cluster}",
                "price_band": int(rng.integers(0, 6)),
                "brand_rank": int(rng.integers(0, 1000)),
            })
            cluster_index = c * config.clusters_per_category + k
            pool = aspect_ids[cluster_index * pool_size:(cluster_index + 1) * pool_size]
            raw = rng.lognormal(mu, sigma)
            count = int(np.clip(round(raw), config.aspects_per_item_min,
                                min(config.aspects_per_item_max, len(pool))))
            chosen = rng.choice(len(pool), size=count, replace=False)
            for a in sorted(int(x) for x in chosen):
                aspect = pool[a]
                text = f"aspect {aspect.split('_')[1]}"
                data.aspects.append({
                    "item_id": item_id,
                    "aspect_id": aspect,
                    "aspect_text": text,
                    "asp_rel": float(round(rng.uniform(0.2, 1.0), 6)),
                    "headers": [f"Similar items that are {text}",
                                f"Customers say these are {text}"],
                })

    clusters_by_category: dict[str, list[str]] = {}
    for cluster in cluster_items:
        clusters_by_category.setdefault(cluster.rsplit("_", 1)[0], []).append(cluster)
    for bucket in clusters_by_category.values():
        bucket.sort()

    ts = 1_600_000_000
    for s in range(config.sessions):
        session_id = f"s{s:07d}"
        category = f"cat{int(session_rng.integers(0, config.num_categories))}"
        homes = clusters_by_category[category]
        home = homes[int(session_rng.integers(0, len(homes)))]
        size = config.session_size_min + int(session_rng.poisson(config.session_size_lambda))
        kind = ("purchase" if session_rng.random() < config.purchase_session_rate
                else "add_to_cart")
        picked: list[str] = []
        for _ in range(size):
            cluster = home
            if len(homes) > 1 and session_rng.random() < config.mixing_rate:
                others = [cl for cl in homes if cl != home]
                cluster = others[int(session_rng.integers(0, len(others)))]
            members = cluster_items[cluster]
            item = members[int(session_rng.integers(0, len(members)))]
            if item not in picked:
                picked.append(item)
        for item in picked:
            ts += 1
            data.sessions.append({"session_id": session_id, "item_id": item,
                                  "kind": kind, "ts": ts})

    sim_rng = np.random.default_rng(root.spawn(2)[1])
    for cluster in sorted(cluster_items):
        members = cluster_items[cluster]
        if len(members) < 2:
            continue
        seen: set[tuple[str, str]] = set()
        for _ in range(config.similarity_pairs_per_cluster):
            i, j = sim_rng.choice(len(members), size=2, replace=False)
            pair = (members[int(i)], members[int(j)])
            key = (min(pair), max(pair))
            if key not in seen:
                seen.add(key)
                data.similarity.append(key)
    return data


def write_synth(data: SynthData, out_dir: Path) -> dict[str, Path]:
    """Write all five input files; byte-identical for identical data."""
    out_dir = Path(out_dir)
    paths = {
        "sessions": out_dir / "sessions.jsonl",
        "catalog": out_dir / "catalog.jsonl",
        "aspects": out_dir / "aspects.jsonl",
        "similarity": out_dir / "similarity.tsv",
        "judgments": out_dir / "judgments.jsonl",
    }
    atomic_write_text(paths["sessions"], "".join(
        json.dumps(row, sort_keys=True) + "\n" for row in data.sessions))
    atomic_write_text(paths["catalog"], "".join(
        json.dumps(row, sort_keys=True) + "\n" for row in data.catalog))
    atomic_write_text(paths["aspects"], "".join(
        json.dumps(row, sort_keys=True) + "\n" for row in data.aspects))
    atomic_write_text(paths["similarity"], "".join(
        f"{a}\t{b}\n" for a, b in data.similarity))
    atomic_write_text(paths["judgments"], "".join(
        json.dumps({"item": item, "cluster": data.clusters[item]}) + "\n"
        for item in sorted(data.clusters)))
    return paths
