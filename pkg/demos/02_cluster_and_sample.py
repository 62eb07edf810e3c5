"""
Stage II: reference-guided clustering and quota-balanced sampling
=================================================================

Fits spherical k-means on a small trusted reference set, assigns a
larger corpus to those centroids by cosine similarity, then draws a
fixed budget with per-cluster quotas, most-central rows first.
"""

from __future__ import annotations

import numpy as np

from pruneforge import (
    ClusterConfig,
    SamplingConfig,
    SyntheticSpec,
    assign_nearest,
    derive_seed,
    draw_component_means,
    generate_synthetic,
    pool_by_cluster,
    spherical_kmeans,
    stratified_select,
)

# one shared set of directions on the sphere, two draws from it:
# a big unlabeled corpus and a small curated reference set
means = draw_component_means(k_true=6, f_d=16, seed=3)
corpus, _ = generate_synthetic(SyntheticSpec(n=4000, f_d=16, k_true=6, seed=10), means)
reference, _ = generate_synthetic(SyntheticSpec(n=300, f_d=16, k_true=6, seed=11), means)

# cluster the reference only; the corpus never touches the fit
cfg = ClusterConfig(k=6, seed=derive_seed(0, "cluster"), max_iters=50)
centroids = spherical_kmeans(reference, cfg)
history = centroids.meta.history
print(f"k-means ran {centroids.meta.iterations} update steps")
print(f"objective went {history[0]:.1f} -> {history[-1]:.1f} (never decreases)")

# every corpus row gets the centroid it is most aligned with
table = assign_nearest(corpus, centroids)
counts = np.bincount(table.label, minlength=centroids.k)
print(f"cluster sizes: {counts.tolist()}")
print(f"mean cosine to assigned centroid: {table.sim.mean():.4f}")

# budget of 600 split evenly across clusters; each cluster contributes
# its most central rows, leftover capacity refills by global similarity
pools = pool_by_cluster(table)
result = stratified_select(pools, SamplingConfig(budget=600))
print(f"selected {len(result.entries)} rows, {result.reallocated_count} via refill")
print(f"first ids: {sorted(result.ids())[:4]}")

# the quota keeps small clusters represented: selection per cluster
for c, (size, got) in enumerate(zip(counts.tolist(), result.per_cluster_counts)):
    print(f"  cluster {c}: {got:4d} of {size:4d} rows selected")
