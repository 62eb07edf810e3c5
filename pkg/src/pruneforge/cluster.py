"""Spherical k-means over unit-norm embeddings: prior centroid construction.

Lloyd iterations maximize sum_x max_k <z_x, mu_k>. The assignment step is
argmax cosine (ties to the smallest cluster index); the update step is the
normalized mean of each cluster's rows; clusters left empty are reseeded to
the rows that currently fit worst (lowest similarity). The objective is
non-decreasing across iterations.

Determinism contract: rows are processed through a canonical id-sorted
order and in fixed-size chunks, so results are bit-identical across runs,
worker counts, and input row permutations. All similarity math runs in
float64; centroids are float32 only at the API boundary.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, DegenerateInputError, ParseError
from .embedding import EmbeddingMatrix, check_unit_norms, ensure_unit_norms, write_embeddings, read_embeddings
from ._util import atomic_write_text

INIT_METHODS = ("kmeans_pp", "random_rows")

# rows per work unit; fixed (never derived from worker count) so float
# accumulation order is stable
CHUNK_ROWS = 16384


@dataclass
class ClusterMeta:
    seed: int
    iterations: int
    objective: float
    init: str = "kmeans_pp"
    # per-assignment-pass objectives; kept in memory for diagnostics, not persisted
    history: list[float] = field(default_factory=list)


@dataclass
class CentroidSet:
    """K unit-norm centroids, row-major float32."""

    centroids: np.ndarray
    meta: ClusterMeta | None = None

    def __post_init__(self) -> None:
        self.centroids = np.ascontiguousarray(self.centroids, dtype=np.float32)
        if self.centroids.ndim != 2 or self.centroids.shape[0] < 1:
            raise DataError(f"centroids must be a K x dim matrix with K >= 1, got {self.centroids.shape}")
        check_unit_norms(self.centroids, tol=1e-5, what="centroid")
        flat = self.centroids.view(np.uint8).reshape(self.centroids.shape[0], -1)
        if np.unique(flat, axis=0).shape[0] != self.centroids.shape[0]:
            raise DataError("two centroids are bit-identical")

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]


@dataclass
class ClusterConfig:
    k: int = 200
    seed: int = 0
    max_iters: int = 100
    tol: float = 1e-4  # relative objective improvement below which we stop
    init: str = "kmeans_pp"

    def validate(self) -> None:
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")
        if self.tol < 0:
            raise ConfigError("tol must be >= 0")
        if self.init not in INIT_METHODS:
            raise ConfigError(f"init must be one of {INIT_METHODS}, got {self.init!r}")
        if not (-(2**63) <= self.seed < 2**64):
            raise ConfigError("seed must fit in 64 bits")


def _row_spans(n: int, chunk_rows: int | None = None):
    if chunk_rows is None:
        chunk_rows = CHUNK_ROWS  # read at call time so tests can shrink it
    return [(s, min(s + chunk_rows, n)) for s in range(0, n, chunk_rows)]


def argmax_similarity(
    data: np.ndarray, centroids64: np.ndarray, workers: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """Per row: index of the most similar centroid and the attained cosine.

    Ties go to the smallest index. Chunked so N x K similarity blocks never
    fully materialize; chunks write disjoint output slices, so any worker
    count produces identical results.
    """
    n = data.shape[0]
    labels = np.empty(n, dtype=np.int64)
    sims = np.empty(n, dtype=np.float64)

    def work(span, rows64=None, block=None):
        s, e = span
        if rows64 is None:  # threaded path: private temporaries per call
            rows64 = data[s:e].astype(np.float64)
            block = rows64 @ centroids64.T
        else:
            rows64 = rows64[: e - s]
            np.copyto(rows64, data[s:e], casting="safe")
            block = np.matmul(rows64, centroids64.T, out=block[: e - s])
        lab = np.argmax(block, axis=1)  # first max -> smallest index on ties
        labels[s:e] = lab
        sims[s:e] = block[np.arange(e - s), lab]

    spans = _row_spans(n)
    if workers <= 1 or len(spans) <= 1:
        # reuse two scratch blocks across chunks; saves a large allocation
        # plus page-fault churn per chunk without changing any result
        rows = spans[0][1] - spans[0][0]
        rows64 = np.empty((rows, data.shape[1]), dtype=np.float64)
        block = np.empty((rows, centroids64.shape[0]), dtype=np.float64)
        for span in spans:
            work(span, rows64, block)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, spans))
    return labels, sims


def _canonical_order(m: EmbeddingMatrix) -> np.ndarray:
    """Row order sorted by id: makes every result independent of input order."""
    return np.argsort(np.asarray(m.ids, dtype=object), kind="stable").astype(np.int64)


def _weighted_pick(weights: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw over a fixed array order (deterministic per rng state)."""
    cum = np.cumsum(weights)
    total = cum[-1]
    if total <= 0:
        raise DegenerateInputError("fewer distinct rows than requested centroids")
    u = rng.random() * total
    return int(np.searchsorted(cum, u, side="right").clip(0, weights.shape[0] - 1))


def kmeanspp_init(m: EmbeddingMatrix, k: int, seed: int) -> CentroidSet:
    """k-means++ seeding under cosine distance d = 1 - <.,.>, d^2 weighting.

    Picks k distinct rows; deterministic for a fixed seed and independent of
    input row order (candidates are ranked through the id-sorted order).
    """
    if k > m.n:
        raise ConfigError(f"k={k} exceeds the {m.n} available rows")
    if k < 1:
        raise ConfigError("k must be >= 1")
    ensure_unit_norms(m, tol=1e-4, what="embedding")
    order = _canonical_order(m)
    data = m.data[order]
    data64 = data.astype(np.float64)
    rng = np.random.default_rng(seed)
    n = data.shape[0]

    chosen = [int(rng.integers(n))]
    d = 1.0 - data64 @ data64[chosen[0]]
    np.maximum(d, 0.0, out=d)
    d[chosen[0]] = 0.0
    byte_rows = data.view(np.uint8).reshape(n, -1)
    while len(chosen) < k:
        while True:
            pick = _weighted_pick(d * d, rng)
            if any(np.array_equal(byte_rows[pick], byte_rows[c]) for c in chosen):
                # duplicate content can carry residual float weight; burn it
                d[pick] = 0.0
                continue
            break
        chosen.append(pick)
        cand = 1.0 - data64 @ data64[pick]
        np.maximum(cand, 0.0, out=cand)
        np.minimum(d, cand, out=d)
        d[pick] = 0.0
    return CentroidSet(
        centroids=data[np.array(chosen)],
        meta=ClusterMeta(seed=seed, iterations=0, objective=float("nan"), init="kmeans_pp"),
    )


def _random_rows_init(m: EmbeddingMatrix, k: int, seed: int) -> CentroidSet:
    order = _canonical_order(m)
    data = m.data[order]
    byte_rows = data.view(np.uint8).reshape(data.shape[0], -1)
    if np.unique(byte_rows, axis=0).shape[0] < k:
        raise DegenerateInputError("fewer distinct rows than requested centroids")
    rng = np.random.default_rng(seed)
    chosen: list[int] = []
    while len(chosen) < k:
        pick = int(rng.integers(data.shape[0]))
        if any(np.array_equal(byte_rows[pick], byte_rows[c]) for c in chosen):
            continue
        chosen.append(pick)
    return CentroidSet(
        centroids=data[np.array(chosen)],
        meta=ClusterMeta(seed=seed, iterations=0, objective=float("nan"), init="random_rows"),
    )


def _update_step(
    data: np.ndarray, labels: np.ndarray, sims: np.ndarray, k: int
) -> np.ndarray:
    """Normalized per-cluster means in float64; empty clusters reseeded to the
    worst-fit rows (ascending similarity, one distinct row each)."""
    n, dim = data.shape
    sums = np.zeros((k, dim), dtype=np.float64)
    for s, e in _row_spans(n):  # sequential, fixed order -> deterministic sums
        lab = labels[s:e]
        order = np.argsort(lab, kind="stable")
        block = data[s:e].astype(np.float64)[order]
        present, starts = np.unique(lab[order], return_index=True)
        sums[present] += np.add.reduceat(block, starts, axis=0)

    counts = np.bincount(labels, minlength=k)
    norms = np.linalg.norm(sums, axis=1)
    # clusters with no members, or whose member vectors cancel out, get reseeded
    dead = np.flatnonzero((counts == 0) | (norms < 1e-12))
    centroids = np.zeros((k, dim), dtype=np.float64)
    alive = np.flatnonzero(norms >= 1e-12)
    centroids[alive] = sums[alive] / norms[alive, None]
    if dead.size:
        worst = np.argsort(sims, kind="stable")[: dead.size]
        for slot, row in zip(dead, worst):
            vec = data[row].astype(np.float64)
            centroids[slot] = vec / np.linalg.norm(vec)
    return centroids


def spherical_kmeans(m: EmbeddingMatrix, cfg: ClusterConfig, workers: int = 1) -> CentroidSet:
    """Cluster unit-norm rows into cfg.k centroids on the hypersphere.

    meta.history holds one objective value per assignment pass
    (non-decreasing); meta.objective is the value attained by the returned
    centroids. Stops when the relative objective improvement drops below
    cfg.tol or after cfg.max_iters updates.
    """
    cfg.validate()
    if cfg.k > m.n:
        raise ConfigError(f"k={cfg.k} exceeds the {m.n} available rows")
    ensure_unit_norms(m, tol=1e-4, what="embedding")

    order = _canonical_order(m)
    data = m.data[order]

    if cfg.init == "kmeans_pp":
        start = kmeanspp_init(m, cfg.k, cfg.seed)
    else:
        start = _random_rows_init(m, cfg.k, cfg.seed)
    centroids64 = start.centroids.astype(np.float64)

    history: list[float] = []
    prev = None
    updates = 0
    while True:
        labels, sims = argmax_similarity(data, centroids64, workers=workers)
        obj = float(np.sum(sims))
        history.append(obj)
        if prev is not None and (obj - prev) < cfg.tol * abs(prev):
            break
        if updates >= cfg.max_iters:
            break
        centroids64 = _update_step(data, labels, sims, cfg.k)
        updates += 1
        prev = obj

    # meta.objective is measured against the float32 centroids actually
    # returned, so persisted artifacts are self-consistent under re-scoring
    final32 = centroids64.astype(np.float32)
    _, final_sims = argmax_similarity(data, final32.astype(np.float64), workers=workers)
    meta = ClusterMeta(
        seed=cfg.seed,
        iterations=updates,
        objective=float(np.sum(final_sims)),
        init=cfg.init,
        history=history,
    )
    return CentroidSet(centroids=final32, meta=meta)


def cluster_objective(m: EmbeddingMatrix, c: CentroidSet, workers: int = 1) -> float:
    """sum over rows of the best cosine similarity to any centroid."""
    if m.dim != c.dim:
        raise DataError(f"dimension mismatch: rows have {m.dim}, centroids {c.dim}")
    _, sims = argmax_similarity(m.data, c.centroids.astype(np.float64), workers=workers)
    return float(np.sum(sims))


def save_centroids(c: CentroidSet, path: str | os.PathLike) -> None:
    """Centroid matrix in the embedding binary format + `key<TAB>value` meta."""
    ids = [f"c{i:05d}" for i in range(c.k)]
    write_embeddings(EmbeddingMatrix(ids=ids, data=c.centroids), path, require_unit_norm=True)
    meta = c.meta or ClusterMeta(seed=0, iterations=0, objective=float("nan"))
    text = (
        f"seed\t{meta.seed}\n"
        f"iterations\t{meta.iterations}\n"
        f"objective\t{meta.objective:.17g}\n"
        f"init\t{meta.init}\n"
    )
    atomic_write_text(str(os.fspath(path)) + ".meta", text)


def load_centroids(path: str | os.PathLike) -> CentroidSet:
    m = read_embeddings(path)
    meta_path = str(os.fspath(path)) + ".meta"
    fields: dict[str, str] = {}
    with open(meta_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError(f"{meta_path}:{lineno}: expected key<TAB>value")
            fields[parts[0]] = parts[1]
    try:
        meta = ClusterMeta(
            seed=int(fields["seed"]),
            iterations=int(fields["iterations"]),
            objective=float(fields["objective"]),
            init=fields.get("init", "kmeans_pp"),
        )
    except (KeyError, ValueError) as exc:
        raise ParseError(f"{meta_path}: bad or missing field: {exc}") from None
    return CentroidSet(centroids=m.data, meta=meta)
