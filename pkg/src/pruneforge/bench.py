"""Synthetic corpora and measurement harnesses.

Verifies the complexity story empirically (assignment linear in N and K,
end-to-end near-linear) and compares selection strategies on generated
mixtures where ground-truth component labels are known. Quality proxies:

* component recall: fraction of true mixture components with at least one
  selected sample (noise rows, labeled -1, never count)
* redundancy: mean over selected samples of the maximum similarity to
  another selected sample (lower = more diverse)

Wall-time assertions downstream are ratio- or slope-based only; absolute
seconds depend on the host and are reported, never asserted.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .assign import assign_nearest, pool_by_cluster
from .baselines import cluster_nearest_select, moderate_ds_select, random_select
from .cluster import CentroidSet, ClusterConfig, spherical_kmeans
from .embedding import EmbeddingMatrix, l2_normalize
from .manifest import DatasetManifest, SampleRecord
from .sample import SamplingConfig, stratified_select
from ._util import atomic_write_text


@dataclass
class SyntheticSpec:
    n: int
    f_d: int
    k_true: int
    imbalance: float = 0.0  # Zipf exponent over component sizes; 0 = balanced
    noise_fraction: float = 0.0
    seed: int = 0
    spread: float = 0.05  # Gaussian jitter around each component mean

    def validate(self) -> None:
        if self.n < 1 or self.f_d < 1 or self.k_true < 1:
            raise ConfigError("n, f_d, and k_true must be positive")
        if self.k_true > self.n:
            raise ConfigError(f"k_true={self.k_true} exceeds n={self.n}")
        if not (0.0 <= self.noise_fraction < 1.0):
            raise ConfigError("noise_fraction must be in [0, 1)")
        if self.imbalance < 0:
            raise ConfigError("imbalance must be >= 0")
        if self.spread <= 0:
            raise ConfigError("spread must be positive")


@dataclass
class BenchReport:
    """Flat scalar metrics plus optional per-trial rows for the CSV."""

    kind: str
    values: dict[str, float] = field(default_factory=dict)
    rows: list[dict] = field(default_factory=list)


def draw_component_means(k_true: int, f_d: int, seed: int) -> np.ndarray:
    """k_true random unit directions; share these across corpus and
    reference draws so both see the same component structure."""
    rng = np.random.default_rng(seed)
    means = rng.normal(size=(k_true, f_d))
    return means / np.linalg.norm(means, axis=1, keepdims=True)


def _zipf_sizes(total: int, k_true: int, exponent: float) -> np.ndarray:
    weights = np.arange(1, k_true + 1, dtype=np.float64) ** (-exponent)
    quotas = weights / weights.sum() * total
    base = np.floor(quotas).astype(np.int64)
    frac = quotas - base
    leftover = total - int(base.sum())
    if leftover > 0:
        order = np.lexsort((np.arange(k_true), -frac))
        base[order[:leftover]] += 1
    return base


def generate_synthetic(
    spec: SyntheticSpec, means: np.ndarray | None = None
) -> tuple[EmbeddingMatrix, np.ndarray]:
    """Unit-norm mixture of Gaussian blobs around unit means plus noise rows.

    Returns (matrix, true_labels); noise rows carry label -1. Rows are
    shuffled so component blocks do not line up with chunk boundaries.
    Deterministic per spec.seed (means may be supplied to share components
    across draws).
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    if means is None:
        means = draw_component_means(spec.k_true, spec.f_d, spec.seed)
    if means.shape != (spec.k_true, spec.f_d):
        raise ConfigError(f"means must be {spec.k_true} x {spec.f_d}, got {means.shape}")

    n_noise = int(round(spec.noise_fraction * spec.n))
    n_signal = spec.n - n_noise
    sizes = _zipf_sizes(n_signal, spec.k_true, spec.imbalance)

    blocks = []
    labels = np.empty(spec.n, dtype=np.int64)
    pos = 0
    for j in range(spec.k_true):
        size = int(sizes[j])
        pts = means[j][None, :] + spec.spread * rng.normal(size=(size, spec.f_d))
        blocks.append(pts)
        labels[pos : pos + size] = j
        pos += size
    if n_noise:
        blocks.append(rng.normal(size=(n_noise, spec.f_d)))
        labels[pos:] = -1
    data = np.concatenate(blocks).astype(np.float32)

    perm = rng.permutation(spec.n)
    data = data[perm]
    labels = labels[perm]
    m = EmbeddingMatrix(ids=[f"x{i:08d}" for i in range(spec.n)], data=data)
    return l2_normalize(m), labels


def synthetic_manifest(m: EmbeddingMatrix, source_label: str | None = None) -> DatasetManifest:
    """Manifest shell for generated embeddings (no rasters behind the uris)."""
    return DatasetManifest(
        records=[SampleRecord(i, f"synthetic://{i}", 1, 1, 0) for i in m.ids],
        source_label=source_label,
    )


def component_recall(selected_ids, true_labels: np.ndarray, all_ids) -> float:
    """Fraction of components present in the corpus that got >= 1 pick."""
    index = {rec_id: i for i, rec_id in enumerate(all_ids)}
    present = set(int(v) for v in np.unique(true_labels) if v >= 0)
    if not present:
        return 0.0
    hit = {int(true_labels[index[s]]) for s in selected_ids if true_labels[index[s]] >= 0}
    return len(hit & present) / len(present)


def redundancy(m: EmbeddingMatrix, selected_ids) -> float:
    """Mean over selected rows of the max similarity to another selection."""
    index = {rec_id: i for i, rec_id in enumerate(m.ids)}
    rows = np.array([index[s] for s in selected_ids], dtype=np.int64)
    if rows.size < 2:
        return 0.0
    sel = m.data[rows].astype(np.float64)
    sims = sel @ sel.T
    np.fill_diagonal(sims, -np.inf)
    return float(sims.max(axis=1).mean())


def _loglog_fit(xs: np.ndarray, ys: np.ndarray) -> tuple[float, float]:
    lx, ly = np.log(xs), np.log(ys)
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(((ly - pred) ** 2).sum())
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return float(slope), r2


def run_scaling_study(
    sizes: list[int],
    k: int = 200,
    f_d: int = 128,
    seed: int = 0,
    repeats: int = 3,
    budget_fraction: float = 0.15,
    k_doubling: bool = True,
    workers: int = 1,
) -> BenchReport:
    """Measure assignment and end-to-end (assign + pool + select) wall-time
    across corpus sizes; fit log-log slopes; optionally measure the cost of
    doubling k at fixed N."""
    if len(sizes) < 3 or any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ConfigError("need at least 3 strictly increasing sizes")
    centroids = CentroidSet(centroids=draw_component_means(k, f_d, seed).astype(np.float32))
    report = BenchReport(kind="scaling_study")

    corpora = []
    for n in sizes:
        spec = SyntheticSpec(n=n, f_d=f_d, k_true=min(32, n), imbalance=1.0,
                             noise_fraction=0.05, seed=seed + n)
        m, _ = generate_synthetic(spec)
        corpora.append(m)
    budgets = [max(1, int(round(budget_fraction * n))) for n in sizes]

    def end_to_end(i):
        t = assign_nearest(corpora[i], centroids, workers=workers)
        pools = pool_by_cluster(t)
        return stratified_select(pools, SamplingConfig(budget=budgets[i]))

    for m in corpora:  # warm pages, caches, and clocks before timing
        assign_nearest(m, centroids, workers=workers)

    # visit the sizes round-robin, reversing direction every pass: clock
    # drift and neighbor load then hit every arm about equally, no arm is
    # always measured right after the largest arm's cache churn, and the
    # median per arm shrugs off one-off spikes
    assign_samples = [[] for _ in sizes]
    end_samples = [[] for _ in sizes]
    selected = [0] * len(sizes)
    for r in range(max(1, repeats)):
        order = range(len(corpora)) if r % 2 == 0 else range(len(corpora) - 1, -1, -1)
        for i in order:
            m = corpora[i]
            start = time.perf_counter()
            assign_nearest(m, centroids, workers=workers)
            assign_samples[i].append(time.perf_counter() - start)
            start = time.perf_counter()
            result = end_to_end(i)
            end_samples[i].append(time.perf_counter() - start)
            selected[i] = len(result.entries)

    assign_times = [float(np.median(ts)) for ts in assign_samples]
    end_times = [float(np.median(ts)) for ts in end_samples]
    for i, n in enumerate(sizes):
        report.rows.append(
            {"n": n, "assign_seconds": assign_times[i],
             "end_to_end_seconds": end_times[i], "selected": selected[i]}
        )
        report.values[f"assign_seconds_{n}"] = assign_times[i]
        report.values[f"end_to_end_seconds_{n}"] = end_times[i]

    slope, r2 = _loglog_fit(np.array(sizes, dtype=float), np.array(assign_times))
    report.values["assign_slope"] = slope
    report.values["assign_r2"] = r2
    e_slope, e_r2 = _loglog_fit(np.array(sizes, dtype=float), np.array(end_times))
    report.values["end_to_end_slope"] = e_slope
    report.values["end_to_end_r2"] = e_r2
    ratios = [b / a for a, b in zip(end_times, end_times[1:])]
    report.values["end_to_end_max_doubling_ratio"] = max(ratios)

    if k_doubling:
        m = corpora[-1]  # longest arms, least relative timer jitter
        double = CentroidSet(
            centroids=draw_component_means(2 * k, f_d, seed + 1).astype(np.float32)
        )
        # warm the new arm, then alternate the two so clock-speed drift
        # cancels in the ratio
        assign_nearest(m, double, workers=workers)
        singles, doubles = [], []
        for _ in range(max(repeats, 5)):
            start = time.perf_counter()
            assign_nearest(m, centroids, workers=workers)
            singles.append(time.perf_counter() - start)
            start = time.perf_counter()
            assign_nearest(m, double, workers=workers)
            doubles.append(time.perf_counter() - start)
        report.values["k_doubling_ratio"] = float(np.median(doubles) / np.median(singles))
    return report


def compare_strategies(
    corpus: EmbeddingMatrix,
    true_labels: np.ndarray,
    reference: EmbeddingMatrix,
    budgets: list[int],
    k: int,
    seed: int = 0,
    workers: int = 1,
) -> BenchReport:
    """Run the quota-balanced sampler and every baseline at equal budgets;
    report selection size, component recall, and redundancy per strategy."""
    centroids = spherical_kmeans(reference, ClusterConfig(k=k, seed=seed), workers=workers)
    table = assign_nearest(corpus, centroids, workers=workers)
    pools = pool_by_cluster(table)
    manifest = synthetic_manifest(corpus)
    report = BenchReport(kind="strategy_comparison")
    for budget in budgets:
        runs = {
            "stratified": stratified_select(pools, SamplingConfig(budget=budget)),
            "random": random_select(manifest, budget, seed=seed),
            "moderate_ds": moderate_ds_select(corpus, table, budget),
            "cluster_nearest": cluster_nearest_select(
                corpus, k=k, budget=budget, seed=seed, workers=workers
            ),
        }
        for name, result in runs.items():
            ids = result.ids()
            row = {
                "budget": budget,
                "strategy": name,
                "selected": len(ids),
                "recall": component_recall(ids, true_labels, corpus.ids),
                "redundancy": redundancy(corpus, ids),
            }
            report.rows.append(row)
            report.values[f"recall_{name}_{budget}"] = row["recall"]
            report.values[f"redundancy_{name}_{budget}"] = row["redundancy"]
            report.values[f"selected_{name}_{budget}"] = len(ids)
    return report


def reference_vs_full_study(
    corpus: EmbeddingMatrix,
    reference: EmbeddingMatrix,
    k: int,
    max_iters: int,
    budget: int,
    seed: int = 0,
    workers: int = 1,
) -> BenchReport:
    """Time the reference-guided stage II (cluster the small reference set,
    then assign + pool + select over the corpus) against clustering the full
    corpus itself under the same k and iteration cap."""
    cfg = ClusterConfig(k=k, seed=seed, max_iters=max_iters, tol=0.0)

    start = time.perf_counter()
    centroids = spherical_kmeans(reference, cfg, workers=workers)
    table = assign_nearest(corpus, centroids, workers=workers)
    pools = pool_by_cluster(table)
    result = stratified_select(pools, SamplingConfig(budget=budget))
    guided_seconds = time.perf_counter() - start

    start = time.perf_counter()
    spherical_kmeans(corpus, cfg, workers=workers)
    full_seconds = time.perf_counter() - start

    report = BenchReport(kind="reference_vs_full")
    report.values["reference_rows"] = reference.n
    report.values["corpus_rows"] = corpus.n
    report.values["reference_guided_seconds"] = guided_seconds
    report.values["full_corpus_cluster_seconds"] = full_seconds
    report.values["time_ratio"] = guided_seconds / full_seconds
    report.values["selected"] = len(result.entries)
    return report


def write_report(path, report: BenchReport, csv_path=None) -> None:
    """`key<TAB>value` lines; optional CSV holding the per-trial rows."""
    lines = [f"kind\t{report.kind}\n"]
    for key, value in report.values.items():
        if isinstance(value, float):
            lines.append(f"{key}\t{value:.6f}\n")
        else:
            lines.append(f"{key}\t{value}\n")
    atomic_write_text(path, "".join(lines))
    if csv_path is not None and report.rows:
        cols = list(report.rows[0].keys())
        out = [",".join(cols) + "\n"]
        for row in report.rows:
            out.append(",".join(str(row[c]) for c in cols) + "\n")
        atomic_write_text(csv_path, "".join(out))
