"""Comparison selection strategies: random, moderate_ds, cluster_nearest.

These deliberately do NOT use the quota-balanced rule of the main sampler:

* random          uniform without replacement, seeded
* moderate_ds     per cluster, the samples closest to the cluster's median
                  similarity (a "typicality" band rather than the top)
* cluster_nearest cluster the target data itself (no reference set), then
                  keep the samples nearest each centroid

moderate_ds and cluster_nearest allocate per-cluster budgets proportional
to pool size with largest-remainder rounding, matching how these methods
are conventionally run rather than the balanced-quota rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ValidationError
from .assign import AssignmentTable, assign_nearest, pool_by_cluster
from .cluster import ClusterConfig, spherical_kmeans
from .embedding import EmbeddingMatrix
from .manifest import DatasetManifest, SelectionEntry
from .sample import SelectionResult

BASELINE_STRATEGIES = ("random", "moderate_ds", "cluster_nearest")


@dataclass
class BaselineConfig:
    strategy: str
    budget: int
    seed: int = 0
    k: int = 200  # cluster_nearest only

    def validate(self) -> None:
        if self.strategy not in BASELINE_STRATEGIES:
            raise ConfigError(f"strategy must be one of {BASELINE_STRATEGIES}, got {self.strategy!r}")
        if self.budget < 1:
            raise ConfigError("budget must be >= 1")
        if self.strategy == "cluster_nearest" and self.k < 1:
            raise ConfigError("cluster_nearest needs k >= 1")


def proportional_allocation(sizes: np.ndarray, target: int) -> np.ndarray:
    """Largest-remainder split of *target* across pools, proportional to size.

    Exact integer arithmetic: base share floor(target*size/total), leftover
    units go to the largest integer remainders (ties to the smaller index).
    Never allocates more than a pool holds.
    """
    sizes = np.asarray(sizes, dtype=np.int64)
    if (sizes < 0).any():
        raise ValidationError("pool sizes must be non-negative")
    total = int(sizes.sum())
    if target >= total:
        return sizes.copy()
    scaled = target * sizes
    base = scaled // total
    mods = scaled % total
    leftover = target - int(base.sum())
    if leftover > 0:
        order = np.lexsort((np.arange(sizes.shape[0]), -mods))
        base[order[:leftover]] += 1
    return base


def random_select(manifest: DatasetManifest, budget: int, seed: int) -> SelectionResult:
    """Uniform sample of min(budget, N) records, in manifest order."""
    if budget < 1:
        raise ConfigError("budget must be >= 1")
    n = len(manifest)
    target = min(budget, n)
    rng = np.random.default_rng(seed)
    picked = np.sort(rng.choice(n, size=target, replace=False))
    ids = manifest.ids()
    entries = [SelectionEntry(id=ids[i], stage="baseline") for i in picked]
    return SelectionResult(
        entries=entries, per_cluster_counts=None, reallocated_count=0, strategy="random"
    )


def moderate_ds_select(
    m: EmbeddingMatrix, assignments: AssignmentTable, budget: int
) -> SelectionResult:
    """Per cluster, keep the samples whose similarity sits closest to the
    cluster's median similarity; budgets proportional to cluster size."""
    if budget < 1:
        raise ConfigError("budget must be >= 1")
    if m.n != assignments.n:
        raise ValidationError(f"{m.n} rows but {assignments.n} assignments")
    k = assignments.k
    sizes = np.bincount(assignments.label, minlength=k)
    target = min(budget, assignments.n)
    alloc = proportional_allocation(sizes, target)

    entries: list[SelectionEntry] = []
    counts = [0] * k
    for j in range(k):
        members = np.flatnonzero(assignments.label == j)
        if members.size == 0:
            continue
        sims = assignments.sim[members]
        med = float(np.median(sims))
        dist = np.abs(sims - med)
        order = np.lexsort((assignments.ids[members], dist))
        for rank, idx in enumerate(members[order[: alloc[j]]]):
            entries.append(
                SelectionEntry(
                    id=str(assignments.ids[idx]),
                    stage="baseline",
                    cluster=j,
                    rank_in_cluster=rank,
                    similarity=float(assignments.sim[idx]),
                )
            )
            counts[j] += 1
    return SelectionResult(
        entries=entries,
        per_cluster_counts=counts,
        reallocated_count=0,
        strategy="moderate_ds",
    )


def cluster_nearest_select(
    m: EmbeddingMatrix,
    k: int,
    budget: int,
    seed: int,
    workers: int = 1,
    cluster_config: ClusterConfig | None = None,
) -> SelectionResult:
    """Cluster the target data itself, then keep nearest-to-centroid samples,
    budgets proportional to cluster size."""
    if budget < 1:
        raise ConfigError("budget must be >= 1")
    if k > m.n:
        raise ConfigError(f"k={k} exceeds the {m.n} available rows")
    cfg = cluster_config if cluster_config is not None else ClusterConfig(k=k, seed=seed)
    if cfg.k != k or cfg.seed != seed:
        raise ConfigError("cluster_config must agree with the k and seed arguments")
    centroids = spherical_kmeans(m, cfg, workers=workers)
    pools = pool_by_cluster(assign_nearest(m, centroids, workers=workers))
    target = min(budget, m.n)
    alloc = proportional_allocation(pools.sizes(), target)

    entries: list[SelectionEntry] = []
    counts = [0] * k
    for j in range(k):
        ids, sims = pools.pool(j)
        for rank in range(int(alloc[j])):
            entries.append(
                SelectionEntry(
                    id=str(ids[rank]),
                    stage="baseline",
                    cluster=j,
                    rank_in_cluster=rank,
                    similarity=float(sims[rank]),
                )
            )
            counts[j] += 1
    return SelectionResult(
        entries=entries,
        per_cluster_counts=counts,
        reallocated_count=0,
        strategy="cluster_nearest",
    )
