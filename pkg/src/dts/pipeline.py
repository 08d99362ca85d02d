"""Stage orchestration: each stage reads upstream artifacts and writes its
own atomically, recording seeds, digests, and counters in the run manifest.

Stage order (an acyclic chain with one branch for the graph/KG split):

    synth -> ingest -> train-kge ----\
         \-> graph  -----------------+-> train-gatne -> index -> recall
                                                      -> carousels -> eval

Running a stage without its upstream artifacts fails with the missing
artifact's logical name. Re-running against a workdir whose manifest was
produced by a different config is refused unless forced.
"""

from __future__ import annotations

import io
import json
import logging
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import binio, carousel, evaluate, gatne, kge, recall, synth, triples
from .walks import Walk, generate_walks, pairs_from_walks
from .config import PipelineConfig
from .errors import ConfigError, DataError, MissingArtifactError
from .graph import EDGE_TYPES, build_graph, degree_anchor_rule, node_sets
from .ingest import (ParseStats, parse_aspects, parse_catalog, parse_sessions,
                     parse_similarity)
from .manifest import RunManifest, config_digest, sha256_file

log = logging.getLogger("dts")

_ARTIFACT_FILES = {
    "triples": "artifacts/triples.tsv",
    "graph": "artifacts/graph.dtsg",
    "nodesets": "artifacts/nodesets.json",
    "base_embeddings": "artifacts/base_embeddings.dtse",
    "index": "artifacts/index.dtse",
    "recall": "artifacts/recall.jsonl",
    "carousels": "artifacts/carousels.jsonl",
    "metrics": "artifacts/metrics.json",
}
for _etype in EDGE_TYPES:
    _ARTIFACT_FILES[f"walks.{_etype}"] = f"artifacts/walks.{_etype}.dtsw"
    _ARTIFACT_FILES[f"pairs.{_etype}"] = f"artifacts/pairs.{_etype}.dtsp"
    _ARTIFACT_FILES[f"embeddings.{_etype}"] = f"artifacts/embeddings.{_etype}.dtse"

_INPUT_ARTIFACTS = ("sessions", "catalog", "aspects", "similarity", "judgments")


def artifact_path(config: PipelineConfig, name: str) -> Path:
    if name in _INPUT_ARTIFACTS:
        return config.input_path(name)
    return config.workdir / _ARTIFACT_FILES[name]


@dataclass(frozen=True)
class StageSpec:
    name: str
    requires: tuple[str, ...]
    outputs: tuple[str, ...]
    run: Callable[[PipelineConfig, dict], dict]


def _require_artifacts(config: PipelineConfig, names) -> dict[str, str]:
    digests = {}
    for name in names:
        path = artifact_path(config, name)
        if not path.exists():
            raise MissingArtifactError(name)
        digests[name] = sha256_file(path)
    return digests


# ---------------------------------------------------------------------------
# Stage implementations. Each returns a counters dict.

def _stage_synth(config: PipelineConfig, options: dict) -> dict:
    cfg = replace(config.synth, seed=config.stage_seed("synth"))
    data = synth.generate_synthetic(cfg)
    out_dir = config.input_path("sessions").parent
    paths = synth.write_synth(data, out_dir)
    for name, path in paths.items():
        expected = config.input_path(name)
        if path != expected:
            raise ConfigError(
                f"synth writes {name} to {path}, but [inputs].{name} = {expected}; "
                "point all inputs at one directory for synthetic runs")
    return {
        "items": len(data.catalog),
        "sessions": len({row["session_id"] for row in data.sessions}),
        "events": len(data.sessions),
        "aspect_rows": len(data.aspects),
        "similarity_pairs": len(data.similarity),
    }


def _load_inputs(config: PipelineConfig, want_similarity: bool):
    strict = config.ingest.strict
    stats = {name: ParseStats() for name in ("sessions", "catalog", "aspects",
                                             "similarity")}
    with open(config.input_path("sessions"), encoding="utf-8") as fh:
        events = parse_sessions(fh, strict=strict, stats=stats["sessions"])
    with open(config.input_path("catalog"), encoding="utf-8") as fh:
        catalog = parse_catalog(fh, strict=strict, stats=stats["catalog"])
    with open(config.input_path("aspects"), encoding="utf-8") as fh:
        aspects = parse_aspects(fh, strict=strict, stats=stats["aspects"])
    similarity: list[tuple[str, str]] = []
    sim_path = config.input_path("similarity")
    if want_similarity and config.ingest.use_similarity and sim_path.exists():
        with open(sim_path, encoding="utf-8") as fh:
            similarity = parse_similarity(fh, strict=strict, stats=stats["similarity"])
    return events, catalog, aspects, similarity, stats


def _stage_ingest(config: PipelineConfig, options: dict) -> dict:
    events, catalog, aspects, similarity, stats = _load_inputs(config, True)
    triple_list = triples.extract_triples(catalog, aspects, similarity)
    buf = io.StringIO()
    triples.write_triples(buf, triple_list)
    binio.atomic_write_text(artifact_path(config, "triples"), buf.getvalue())
    counters = {f"{name}_parsed": s.parsed for name, s in stats.items()}
    counters.update({f"{name}_skipped": s.skipped for name, s in stats.items()
                     if s.skipped})
    counters["triples"] = len(triple_list)
    return counters


def _stage_graph(config: PipelineConfig, options: dict) -> dict:
    events, catalog, aspects, _, stats = _load_inputs(config, False)
    aspect_items = [i for i in aspects if i in catalog]
    report = build_graph(events, catalog, extra_nodes=aspect_items)
    graph = report.graph
    sets = node_sets(events, aspects,
                     degree_anchor_rule(graph, config.ingest.anchor_min_degree))
    binio.save_graph(artifact_path(config, "graph"), graph)
    payload = {
        "v_a": sorted(sets.v_a),
        "v_b": sorted(sets.v_b),
        "anchors": sorted(sets.anchors),
    }
    binio.atomic_write_text(artifact_path(config, "nodesets"),
                            json.dumps(payload, indent=1) + "\n")
    return {
        "nodes": graph.num_nodes,
        "edges_co_bought": graph.edge_count("co_bought"),
        "edges_co_atc": graph.edge_count("co_atc"),
        "dropped_items": report.dropped_items,
        "v_a": len(sets.v_a),
        "v_b": len(sets.v_b),
        "anchors": len(sets.anchors),
    }


def _stage_train_kge(config: PipelineConfig, options: dict) -> dict:
    with open(artifact_path(config, "triples"), encoding="utf-8") as fh:
        triple_list = triples.read_triples(fh)
    with open(config.input_path("catalog"), encoding="utf-8") as fh:
        catalog = parse_catalog(fh, strict=config.ingest.strict)
    cfg = replace(config.kge, seed=config.stage_seed("train-kge"))
    model = kge.train_kge(triple_list, cfg)
    item_ids = sorted(set(catalog) & set(model.entity_ids))
    matrix, ids = model.item_matrix(item_ids)
    binio.save_matrix(artifact_path(config, "base_embeddings"),
                      matrix.astype(np.float32), ids)
    return {"entities": len(model.entity_ids), "items_embedded": len(ids),
            "relations": len(model.relation_names)}


def _stage_train_gatne(config: PipelineConfig, options: dict) -> dict:
    graph = binio.load_graph(artifact_path(config, "graph"))
    base_matrix, base_ids = binio.load_matrix(artifact_path(config, "base_embeddings"))
    seed = config.stage_seed("train-gatne")
    cfg = replace(config.gatne, seed=seed)

    walk_map = {}
    pair_map = {}
    workers = config.threads
    for etype in EDGE_TYPES:
        etype_walks = generate_walks(graph, etype, cfg.walk_length,
                                     cfg.num_walks, seed, workers=workers)
        walk_map[etype] = etype_walks
        pair_map[etype] = pairs_from_walks(etype_walks, cfg.window)
        binio.save_walks(artifact_path(config, f"walks.{etype}"), etype, seed,
                         [w.nodes for w in etype_walks])
        binio.save_pairs(artifact_path(config, f"pairs.{etype}"), etype, seed,
                         np.array([(p.center, p.context) for p in pair_map[etype]],
                                  dtype=np.uint32).reshape(-1, 2))

    result = gatne.train_gatne(graph, base_matrix, base_ids, cfg,
                               walks=walk_map, pairs=pair_map)
    for etype, matrix in result.embeddings.items():
        binio.save_matrix(artifact_path(config, f"embeddings.{etype}"),
                          matrix.astype(np.float32), list(result.node_ids))
    counters = {"nodes": graph.num_nodes,
                "epochs_run": len(result.epoch_losses)}
    for etype in EDGE_TYPES:
        counters[f"pairs_{etype}"] = len(pair_map[etype])
    if result.epoch_losses:
        counters["final_loss"] = round(result.epoch_losses[-1], 6)
    return counters


def _load_nodesets(config: PipelineConfig) -> dict[str, list[str]]:
    with open(artifact_path(config, "nodesets"), encoding="utf-8") as fh:
        return json.load(fh)


def _stage_index(config: PipelineConfig, options: dict) -> dict:
    edge = config.recall.edge_type
    matrix, ids = binio.load_matrix(artifact_path(config, f"embeddings.{edge}"))
    sets = _load_nodesets(config)
    index = recall.build_index(matrix, ids, sets["v_b"],
                               normalize=config.recall.normalize)
    binio.save_matrix(artifact_path(config, "index"),
                      index.matrix.astype(np.float32), list(index.ids))
    return {"rows": len(index), "edge_type": edge}


def _stage_recall(config: PipelineConfig, options: dict) -> dict:
    edge = config.recall.edge_type
    emb_matrix, emb_ids = binio.load_matrix(artifact_path(config, f"embeddings.{edge}"))
    index_matrix, index_ids = binio.load_matrix(artifact_path(config, "index"))
    index = recall.FlatIndex(index_matrix, index_ids)
    sets = _load_nodesets(config)
    anchors = sorted(sets["anchors"])
    row_of = {nid: i for i, nid in enumerate(emb_ids)}
    missing = [a for a in anchors if a not in row_of]
    if missing:
        raise DataError(f"anchors without embeddings: {missing[:5]!r}")
    vectors = {a: emb_matrix[row_of[a]].astype(np.float64) for a in anchors}
    sets_out = recall.batch_recall(index, anchors, vectors, p=config.recall.p,
                                   normalize=config.recall.normalize,
                                   workers=config.threads)
    lines = []
    for rs in sets_out:
        items = [[e.item_id, e.ann_rel] for e in rs.entries]
        lines.append(json.dumps({"anchor": rs.anchor, "items": items}) + "\n")
    binio.atomic_write_text(artifact_path(config, "recall"), "".join(lines))
    return {"anchors_queried": len(anchors), "edge_type": edge,
            "p": config.recall.p}


def read_recall_file(path: Path) -> list[recall.RecallSet]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            entries = tuple(recall.RecallEntry(item_id=i, ann_rel=float(r))
                            for i, r in row["items"])
            out.append(recall.RecallSet(anchor=row["anchor"], entries=entries))
    return out


def _stage_carousels(config: PipelineConfig, options: dict) -> dict:
    recall_sets = read_recall_file(artifact_path(config, "recall"))
    with open(config.input_path("aspects"), encoding="utf-8") as fh:
        aspects = parse_aspects(fh, strict=config.ingest.strict)
    top_k = options.get("top_k_headers")
    lines = []
    suppressed = 0
    for rs in recall_sets:
        table = carousel.aspect_scores(rs, aspects)
        built = carousel.assemble_carousel(rs.anchor, rs, table, aspects,
                                           min_support=config.recall.min_support,
                                           policy=config.recall.header_policy)
        if built is None:
            suppressed += 1
            continue
        row = {
            "anchor": built.anchor,
            "aspect_id": built.aspect_id,
            "header": built.header,
            "items": list(built.items),
            "score": built.score,
            "support": built.support,
        }
        if top_k:
            ranked = carousel.select_aspect(table, min_support=config.recall.min_support,
                                            k=top_k)
            row["ranked_headers"] = [
                {"aspect_id": aspect_id,
                 "header": carousel.render_header(
                     _annotation_for(aspects, table, aspect_id),
                     policy=config.recall.header_policy, anchor=rs.anchor),
                 "score": score,
                 "support": table.scores[aspect_id].support}
                for aspect_id, score in ranked]
        lines.append(json.dumps(row) + "\n")
    binio.atomic_write_text(artifact_path(config, "carousels"), "".join(lines))
    return {"carousels": len(lines), "suppressed_carousels": suppressed}


def _annotation_for(aspects, table, aspect_id):
    item = table.scores[aspect_id].items[0]
    return next(a for a in aspects[item] if a.aspect_id == aspect_id)


def _stage_eval(config: PipelineConfig, options: dict) -> dict:
    recall_sets = read_recall_file(artifact_path(config, "recall"))
    judgments = evaluate.RelevanceJudgments.from_file(config.input_path("judgments"))
    k = config.recall.ndcg_k
    ndcg, evaluated = evaluate.mean_ndcg(recall_sets, judgments, k)
    neighbor_lists = {rs.anchor: [e.item_id for e in rs.entries] for rs in recall_sets}
    purity_mean, purity_min = evaluate.cluster_purity(neighbor_lists,
                                                      judgments.clusters, top_n=5)
    metrics = {
        f"ndcg@{k}": round(ndcg, 6),
        "anchors_evaluated": evaluated,
        "cluster_purity@5": round(purity_mean, 6),
        "cluster_purity@5_min": round(purity_min, 6),
        "ndcg_gain": "linear",
    }
    binio.atomic_write_text(artifact_path(config, "metrics"),
                            json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    return dict(metrics)


def _stage_specs(config: PipelineConfig) -> dict[str, StageSpec]:
    edge = config.recall.edge_type
    gatne_outputs = tuple(f"{kind}.{etype}" for etype in EDGE_TYPES
                          for kind in ("walks", "pairs", "embeddings"))
    return {s.name: s for s in (
        StageSpec("synth", (), ("sessions", "catalog", "aspects", "similarity",
                                "judgments"), _stage_synth),
        StageSpec("ingest", ("sessions", "catalog", "aspects"), ("triples",),
                  _stage_ingest),
        StageSpec("graph", ("sessions", "catalog", "aspects"),
                  ("graph", "nodesets"), _stage_graph),
        StageSpec("train-kge", ("triples", "catalog"), ("base_embeddings",),
                  _stage_train_kge),
        StageSpec("train-gatne", ("graph", "base_embeddings"), gatne_outputs,
                  _stage_train_gatne),
        StageSpec("index", (f"embeddings.{edge}", "nodesets"), ("index",),
                  _stage_index),
        StageSpec("recall", (f"embeddings.{edge}", "index", "nodesets"),
                  ("recall",), _stage_recall),
        StageSpec("carousels", ("recall", "aspects"), ("carousels",),
                  _stage_carousels),
        StageSpec("eval", ("recall", "judgments"), ("metrics",), _stage_eval),
    )}


STAGE_NAMES = ("synth", "ingest", "graph", "train-kge", "train-gatne", "index",
               "recall", "carousels", "eval")


def run_stage(name: str, config: PipelineConfig, force: bool = False,
              top_k_headers: int | None = None) -> dict:
    """Run one stage end to end; returns its manifest record."""
    specs = _stage_specs(config)
    if name not in specs:
        raise ConfigError(f"unknown stage {name!r}; expected one of {STAGE_NAMES}")
    spec = specs[name]
    config.validate()
    config.workdir.mkdir(parents=True, exist_ok=True)

    manifest = RunManifest.load(config.workdir)
    current_hash = config_digest(config.canonical_dict())
    if manifest.config_hash is not None and manifest.config_hash != current_hash:
        if not force:
            raise ConfigError(
                "config hash mismatch with existing artifacts in "
                f"{config.workdir} (use --force to overwrite)")
        manifest.data["stages"] = {}
    manifest.set_config_hash(current_hash)

    input_digests = _require_artifacts(config, spec.requires)
    seed = config.stage_seed(name)
    log.info("stage %s starting (seed %d)", name, seed)
    started = time.perf_counter()
    counters = spec.run(config, {"top_k_headers": top_k_headers})
    elapsed = time.perf_counter() - started

    output_digests = {}
    for out_name in spec.outputs:
        path = artifact_path(config, out_name)
        if not path.exists():
            raise DataError(f"stage {name} did not produce {out_name}")
        output_digests[out_name] = sha256_file(path)

    record = manifest.record_stage(name, seed=seed, elapsed_s=elapsed,
                                   inputs=input_digests, outputs=output_digests,
                                   counters=counters)
    manifest.save()
    log.info("stage %s done in %.2fs: %s", name, elapsed, counters)
    return record
