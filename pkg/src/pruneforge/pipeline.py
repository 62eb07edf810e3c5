"""File-mediated pipeline orchestration with resumable stages.

Execution for the main strategy:

    entropy_filter -> spherical_kmeans(reference) -> assign_nearest
    -> pool_by_cluster -> stratified_select

Baseline strategies skip the entropy stage and select directly over the
full corpus.

Every stage writes its outputs plus a completion marker recording a digest
of the stage's inputs (file content hashes and the relevant config values)
and the content hashes of its outputs. A rerun reuses a stage only when
both sides still match, so edited inputs, changed settings, or tampered
outputs all force recomputation, and a resumed run equals a fresh one.
Worker count never enters a digest: outputs are invariant to it.

Randomness flows from the single run seed. The cluster stage uses
cfg.cluster.seed (validate_config derives it as derive_seed(seed,
"cluster")); the random baseline draws with derive_seed(seed, "baseline").

run_metadata.cfg, written on success, is itself a valid config file
resolving to the same run (paths absolute, defaults materialized).
"""

from __future__ import annotations

import hashlib
import os

import numpy as np

from .errors import ConfigError, DataError, InfeasibleBudgetError
from .assign import assign_nearest, pool_by_cluster, read_assignment, write_assignment
from .baselines import cluster_nearest_select, moderate_ds_select, random_select
from .cluster import ClusterConfig, load_centroids, save_centroids, spherical_kmeans
from .config import PipelineConfig, check_pipeline_config, write_config
from .embedding import EmbeddingMatrix, l2_normalize, read_embeddings
from .entropy import EntropyConfig, entropy_filter, read_scores, write_rejects, write_scores
from .manifest import DatasetManifest, load_manifest, read_selection, write_manifest, write_selection
from .sample import (
    SamplingConfig,
    SelectionResult,
    compute_budget,
    read_selection_stats,
    stratified_select,
    write_selection_stats,
)
from ._util import atomic_write_text, derive_seed, sha256_file

STAGE1_MANIFEST = "stage1_manifest.tsv"
SCORES_FILE = "entropy_scores.tsv"
REJECTS_FILE = "entropy_rejects.tsv"
CENTROIDS_FILE = "centroids.bin"
ASSIGNMENTS_FILE = "assignments.tsv"
SELECTION_FILE = "selection.tsv"
STATS_FILE = "selection_stats.tsv"
METADATA_FILE = "run_metadata.cfg"
MARKER_DIR = "markers"


def _digest(parts: list[str]) -> str:
    h = hashlib.sha256()
    for part in parts:
        h.update(part.encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


def _entropy_repr(cfg: EntropyConfig) -> str:
    return (
        f"mode={cfg.mode} tau={cfg.tau!r} keep_fraction={cfg.keep_fraction!r} "
        f"levels={cfg.levels} policy={cfg.grayscale_policy}"
    )


def _cluster_repr(cfg: ClusterConfig) -> str:
    return f"k={cfg.k} seed={cfg.seed} max_iters={cfg.max_iters} tol={cfg.tol!r} init={cfg.init}"


def _marker_path(out_dir: str, stage: str) -> str:
    return os.path.join(out_dir, MARKER_DIR, f"{stage}.done")


def _stage_is_fresh(out_dir: str, stage: str, digest: str) -> bool:
    """True when the marker exists, its input digest matches, and every
    recorded output is still present with its recorded content hash."""
    path = _marker_path(out_dir, stage)
    if not os.path.isfile(path):
        return False
    recorded_inputs = None
    outputs: list[tuple[str, str]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            cols = line.rstrip("\n").split("\t")
            if cols[0] == "inputs" and len(cols) == 2:
                recorded_inputs = cols[1]
            elif cols[0] == "output" and len(cols) == 3:
                outputs.append((cols[1], cols[2]))
    if recorded_inputs != digest or not outputs:
        return False
    for name, sha in outputs:
        target = os.path.join(out_dir, name)
        if not os.path.isfile(target) or sha256_file(target) != sha:
            return False
    return True


def _write_marker(out_dir: str, stage: str, digest: str, output_names: list[str]) -> None:
    lines = [f"stage\t{stage}\n", f"inputs\t{digest}\n"]
    for name in output_names:
        lines.append(f"output\t{name}\t{sha256_file(os.path.join(out_dir, name))}\n")
    atomic_write_text(_marker_path(out_dir, stage), "".join(lines))


def _subset_embeddings(corpus: EmbeddingMatrix, ids: list[str]) -> EmbeddingMatrix:
    """Rows for *ids* in that order; missing ids are a join error."""
    index = {rec_id: i for i, rec_id in enumerate(corpus.ids)}
    missing = [rec_id for rec_id in ids if rec_id not in index]
    if missing:
        shown = ", ".join(missing[:100])
        extra = "" if len(missing) <= 100 else f" (+{len(missing) - 100} more)"
        raise DataError(f"{len(missing)} id(s) have no embedding row: {shown}{extra}")
    rows = np.array([index[rec_id] for rec_id in ids], dtype=np.int64)
    return EmbeddingMatrix(ids=list(ids), data=corpus.data[rows])


def _resolve_budget(cfg: PipelineConfig, n_after: int, n_original: int) -> int:
    if cfg.pruning_ratio is not None:
        return compute_budget(n_after, cfg.pruning_ratio, n_original)
    if cfg.budget > n_after:
        raise InfeasibleBudgetError(
            f"budget {cfg.budget} exceeds the {n_after} available samples"
        )
    return cfg.budget


def _load_selection(out_dir: str) -> SelectionResult:
    entries = read_selection(os.path.join(out_dir, SELECTION_FILE))
    stats = read_selection_stats(os.path.join(out_dir, STATS_FILE))
    cluster_keys = [key for key in stats if key.startswith("cluster_")]
    counts = None
    if cluster_keys:
        counts = [int(stats[f"cluster_{j}"]) for j in range(len(cluster_keys))]
    return SelectionResult(
        entries=entries,
        per_cluster_counts=counts,
        reallocated_count=int(stats.get("reallocated", "0")),
        strategy=stats.get("strategy", "stratified"),
    )


def run_pipeline(cfg: PipelineConfig, log=None) -> SelectionResult:
    """Execute the configured run end to end, reusing completed stages.

    *log*, when given, receives one human-readable line per stage.
    """
    problems = check_pipeline_config(cfg)
    if problems:
        raise ConfigError("; ".join(problems))
    notify = log if log is not None else (lambda message: None)

    os.makedirs(os.path.join(cfg.out_dir, MARKER_DIR), exist_ok=True)
    manifest = load_manifest(cfg.manifest_path)
    manifest_sha = sha256_file(cfg.manifest_path)

    if cfg.strategy == "primary":
        result = _run_primary(cfg, manifest, manifest_sha, notify)
    else:
        result = _run_baseline(cfg, manifest, manifest_sha, notify)

    write_config(os.path.join(cfg.out_dir, METADATA_FILE), cfg)
    return result


def _run_primary(cfg, manifest: DatasetManifest, manifest_sha: str, notify) -> SelectionResult:
    out = cfg.out_dir

    digest = _digest(["stage=entropy", f"manifest={manifest_sha}", _entropy_repr(cfg.entropy)])
    if _stage_is_fresh(out, "entropy", digest):
        kept = load_manifest(os.path.join(out, STAGE1_MANIFEST))
        scores = read_scores(os.path.join(out, SCORES_FILE))
        notify("entropy: reused")
    else:
        kept, scores, rejects = entropy_filter(manifest, cfg.entropy, workers=cfg.workers)
        write_manifest(os.path.join(out, STAGE1_MANIFEST), kept)
        write_scores(os.path.join(out, SCORES_FILE), scores)
        write_rejects(os.path.join(out, REJECTS_FILE), rejects)
        _write_marker(out, "entropy", digest, [STAGE1_MANIFEST, SCORES_FILE, REJECTS_FILE])
        notify(f"entropy: kept {len(kept)} of {len(manifest)} ({len(rejects)} rejects)")

    # budget feasibility is known as soon as the survivor count is; fail
    # before the expensive stages rather than after them
    budget = _resolve_budget(cfg, n_after=len(kept), n_original=len(manifest))

    ref_sha = sha256_file(cfg.reference_embeddings_path)
    digest = _digest(["stage=cluster", f"reference={ref_sha}", _cluster_repr(cfg.cluster)])
    centroid_outputs = [CENTROIDS_FILE, CENTROIDS_FILE + ".ids", CENTROIDS_FILE + ".meta"]
    if _stage_is_fresh(out, "cluster", digest):
        centroids = load_centroids(os.path.join(out, CENTROIDS_FILE))
        notify("cluster: reused")
    else:
        reference = l2_normalize(read_embeddings(cfg.reference_embeddings_path))
        centroids = spherical_kmeans(reference, cfg.cluster, workers=cfg.workers)
        save_centroids(centroids, os.path.join(out, CENTROIDS_FILE))
        _write_marker(out, "cluster", digest, centroid_outputs)
        notify(f"cluster: {cfg.cluster.k} centroids from {reference.n} reference rows")

    digest = _digest(
        [
            "stage=assign",
            f"embeddings={sha256_file(cfg.embeddings_path)}",
            f"survivors={sha256_file(os.path.join(out, STAGE1_MANIFEST))}",
            f"centroids={sha256_file(os.path.join(out, CENTROIDS_FILE))}",
        ]
    )
    if _stage_is_fresh(out, "assign", digest):
        table = read_assignment(os.path.join(out, ASSIGNMENTS_FILE))
        notify("assign: reused")
    else:
        corpus = read_embeddings(cfg.embeddings_path)
        survivors = l2_normalize(_subset_embeddings(corpus, kept.ids()))
        table = assign_nearest(survivors, centroids, workers=cfg.workers)
        write_assignment(os.path.join(out, ASSIGNMENTS_FILE), table)
        _write_marker(out, "assign", digest, [ASSIGNMENTS_FILE])
        notify(f"assign: {table.n} rows over {table.k} clusters")

    digest = _digest(
        [
            "stage=sample",
            f"assignments={sha256_file(os.path.join(out, ASSIGNMENTS_FILE))}",
            f"budget={budget}",
            "strategy=primary",
        ]
    )
    if _stage_is_fresh(out, "sample", digest):
        result = _load_selection(out)
        notify("sample: reused")
    else:
        pools = pool_by_cluster(table)
        result = stratified_select(pools, SamplingConfig(budget=budget))
        for entry in result.entries:
            entry.entropy_bits = scores.get(entry.id)
        write_selection(os.path.join(out, SELECTION_FILE), result.entries)
        write_selection_stats(os.path.join(out, STATS_FILE), result)
        _write_marker(out, "sample", digest, [SELECTION_FILE, STATS_FILE])
        notify(f"sample: {len(result.entries)} selected ({result.reallocated_count} reallocated)")
    return result


def _run_baseline(cfg, manifest: DatasetManifest, manifest_sha: str, notify) -> SelectionResult:
    out = cfg.out_dir
    budget = _resolve_budget(cfg, n_after=len(manifest), n_original=len(manifest))

    parts = [
        "stage=baseline",
        f"manifest={manifest_sha}",
        f"strategy={cfg.strategy}",
        f"budget={budget}",
        f"seed={cfg.seed}",
    ]
    if cfg.strategy in ("moderate_ds", "cluster_nearest"):
        parts.append(f"embeddings={sha256_file(cfg.embeddings_path)}")
        parts.append(_cluster_repr(cfg.cluster))
    digest = _digest(parts)

    if _stage_is_fresh(out, "baseline", digest):
        result = _load_selection(out)
        notify(f"baseline[{cfg.strategy}]: reused")
        return result

    if cfg.strategy == "random":
        result = random_select(manifest, budget, seed=derive_seed(cfg.seed, "baseline"))
    else:
        corpus = read_embeddings(cfg.embeddings_path)
        rows = l2_normalize(_subset_embeddings(corpus, manifest.ids()))
        if cfg.strategy == "moderate_ds":
            centroids = spherical_kmeans(rows, cfg.cluster, workers=cfg.workers)
            table = assign_nearest(rows, centroids, workers=cfg.workers)
            result = moderate_ds_select(rows, table, budget)
        else:
            result = cluster_nearest_select(
                rows,
                k=cfg.cluster.k,
                budget=budget,
                seed=cfg.cluster.seed,
                workers=cfg.workers,
                cluster_config=cfg.cluster,
            )
    write_selection(os.path.join(out, SELECTION_FILE), result.entries)
    write_selection_stats(os.path.join(out, STATS_FILE), result)
    _write_marker(out, "baseline", digest, [SELECTION_FILE, STATS_FILE])
    notify(f"baseline[{cfg.strategy}]: {len(result.entries)} selected")
    return result
