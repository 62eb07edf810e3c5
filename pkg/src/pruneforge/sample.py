"""Quota-balanced, centroid-prioritized selection over candidate pools.

The rule, given budget B over K pools:

1. q = floor(B / K); every pool contributes its top-q rows by similarity
   (pools smaller than q contribute everything).
2. The remaining budget is filled from the union of unselected rows in
   descending similarity, ties by ascending id, until min(B, N) rows are
   selected.

B < K makes q = 0, so selection degenerates to the pure global
similarity order. Increasing B within one q regime only ever adds rows;
crossing a multiple of K re-balances quotas, which can swap depth in large
pools for breadth, so selections are only nested while q is unchanged.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InfeasibleBudgetError, ParseError, ValidationError
from .assign import CandidatePools
from .manifest import SelectionEntry
from ._util import atomic_write_text


@dataclass
class SamplingConfig:
    budget: int

    def validate(self) -> None:
        if self.budget < 1:
            raise ConfigError("budget must be >= 1")


@dataclass
class SelectionResult:
    """Selected entries plus bookkeeping for audits and stats sidecars.

    per_cluster_counts is None for strategies that never cluster (random).
    """

    entries: list[SelectionEntry]
    per_cluster_counts: list[int] | None
    reallocated_count: int
    strategy: str = "stratified"

    def __post_init__(self) -> None:
        if self.per_cluster_counts is not None:
            if sum(self.per_cluster_counts) != len(self.entries):
                raise ValidationError("per-cluster counts do not sum to the entry count")
        if self.reallocated_count < 0:
            raise ValidationError("reallocated_count must be >= 0")

    def ids(self) -> list[str]:
        return [e.id for e in self.entries]


def stratified_select(pools: CandidatePools, cfg: SamplingConfig) -> SelectionResult:
    """Apply the quota / top-q / global-remainder rule to the pools."""
    cfg.validate()
    budget = cfg.budget
    k = pools.k
    n = pools.n
    target = min(budget, n)

    sizes = pools.sizes()
    q = budget // k
    take = np.minimum(sizes, q)

    row_cluster = np.repeat(np.arange(k, dtype=np.int64), sizes)
    row_rank = np.arange(n, dtype=np.int64) - np.repeat(pools.offsets[:-1], sizes)
    quota_mask = row_rank < np.repeat(take, sizes)

    quota_rows = np.flatnonzero(quota_mask)  # already (cluster asc, rank asc)
    need = target - int(take.sum())
    if need > 0:
        rem_rows = np.flatnonzero(~quota_mask)
        order = np.lexsort((pools.ids[rem_rows], -pools.sims[rem_rows]))
        fill_rows = rem_rows[order[:need]]
    else:
        fill_rows = np.empty(0, dtype=np.int64)

    entries = [
        SelectionEntry(
            id=str(pools.ids[r]),
            stage="cluster_sample",
            cluster=int(row_cluster[r]),
            rank_in_cluster=int(row_rank[r]),
            similarity=float(pools.sims[r]),
        )
        for r in np.concatenate([quota_rows, fill_rows])
    ]
    selected_clusters = np.concatenate([row_cluster[quota_rows], row_cluster[fill_rows]])
    counts = np.bincount(selected_clusters, minlength=k).tolist()
    return SelectionResult(
        entries=entries,
        per_cluster_counts=counts,
        reallocated_count=int(fill_rows.shape[0]),
        strategy="stratified",
    )


def compute_budget(n_after_stage1: int, overall_pruning_ratio: float, n_original: int) -> int:
    """B = round((1 - pruning_ratio) * n_original), checked for feasibility.

    The ratio is measured against the original corpus, not the stage-I
    survivor set, so both stages together discard exactly that fraction.
    """
    if not (0.0 < overall_pruning_ratio < 1.0):
        raise ConfigError("overall_pruning_ratio must be in (0, 1)")
    if n_after_stage1 > n_original:
        raise ConfigError("stage-I output larger than the original corpus")
    if n_original < 1:
        raise ConfigError("n_original must be >= 1")
    budget = round((1.0 - overall_pruning_ratio) * n_original)
    if budget < 1:
        raise InfeasibleBudgetError(
            f"pruning ratio {overall_pruning_ratio} of {n_original} samples rounds to an empty subset"
        )
    if budget > n_after_stage1:
        raise InfeasibleBudgetError(
            f"target subset of {budget} exceeds the {n_after_stage1} stage-I survivors; "
            "raise the stage-I keep fraction (or tau) so more samples reach stage II"
        )
    return budget


def write_selection_stats(path: str | os.PathLike, result: SelectionResult) -> None:
    """`key<TAB>value` sidecar: totals plus one line per cluster count."""
    lines = [
        f"strategy\t{result.strategy}\n",
        f"selected\t{len(result.entries)}\n",
        f"reallocated\t{result.reallocated_count}\n",
    ]
    for j, count in enumerate(result.per_cluster_counts or []):
        lines.append(f"cluster_{j}\t{count}\n")
    atomic_write_text(path, "".join(lines))


def read_selection_stats(path: str | os.PathLike) -> dict[str, str]:
    """Stats sidecar back as a raw key -> value map."""
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) != 2:
                raise ParseError(f"{os.fspath(path)}:{lineno}: expected key<TAB>value")
            out[cols[0]] = cols[1]
    return out
