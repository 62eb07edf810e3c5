"""End-to-end acceptance gate.

Each test checks one headline guarantee of the package at its stated
tolerance and prints a single PASS line on success, so `pytest -v` (or
`-rA`) reads as a checklist. Oracles here are independent of the library
code under test: arbitrary-precision entropy via mpmath, brute-force
argmax in float64, and a literal transcription of the sampling rule.
"""

from __future__ import annotations

import math
import time
from pathlib import Path

import mpmath as mp
import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score

from pruneforge._util import derive_seed
from pruneforge.assign import AssignmentTable, assign_nearest, pool_by_cluster
from pruneforge.baselines import random_select
from pruneforge.bench import (
    SyntheticSpec,
    draw_component_means,
    generate_synthetic,
    component_recall,
    reference_vs_full_study,
    run_scaling_study,
    synthetic_manifest,
)
from pruneforge.cluster import CentroidSet, ClusterConfig, spherical_kmeans
from pruneforge.config import PipelineConfig, parse_config_text, validate_config
from pruneforge.embedding import EmbeddingMatrix, l2_normalize, write_embeddings
from pruneforge.entropy import (
    EntropyConfig,
    apply_threshold,
    apply_top_fraction,
    grayscale_histogram,
    shannon_entropy,
)
from pruneforge.manifest import DatasetManifest, SampleRecord, write_manifest
from pruneforge.pipeline import SELECTION_FILE, STATS_FILE, run_pipeline
from pruneforge.sample import SamplingConfig, read_selection_stats, stratified_select

from conftest import write_config_file

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def _report(name: str) -> None:
    print(f"[PASS] {name}")


def entropy_oracle_bits(counts: np.ndarray) -> float:
    """Arbitrary-precision Shannon entropy of a count vector, in bits."""
    with mp.workdps(40):
        total = mp.mpf(int(counts.sum()))
        acc = mp.mpf(0)
        for c in counts[counts > 0]:
            p = mp.mpf(int(c)) / total
            acc -= p * mp.log(p) / mp.log(2)
        return float(acc)


def selection_oracle(rows: list[tuple[str, int, float]], k: int, budget: int) -> set[str]:
    """Literal restatement of the quota rule: floor(B/K) per cluster by
    similarity (ties by id), then one global fill pass over the leftovers."""
    pools = {
        j: sorted((r for r in rows if r[1] == j), key=lambda r: (-r[2], r[0]))
        for j in range(k)
    }
    q = budget // k
    chosen = []
    for j in range(k):
        chosen.extend(pools[j][:q])
    leftovers = sorted(
        (r for j in range(k) for r in pools[j][q:]), key=lambda r: (-r[2], r[0])
    )
    target = min(budget, len(rows))
    chosen.extend(leftovers[: target - len(chosen)])
    return {r[0] for r in chosen}


# --- shared 10k-image corpus for the pipeline-level checks -----------------


@pytest.fixture(scope="session")
def corpus10k(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus10k")
    n, dim, k_true = 10_000, 32, 20
    rng = np.random.default_rng(7)
    records = []
    for i in range(n):
        rec_id = f"img{i:05d}"
        raster = root / f"{rec_id}.npy"
        if i % 2 == 0:
            np.save(raster, np.full((8, 8), (i * 37) % 256, dtype=np.uint8))
        else:
            np.save(raster, rng.integers(0, 256, size=(8, 8), dtype=np.uint8))
        records.append(SampleRecord(rec_id, str(raster), 8, 8, 1))
    manifest_path = root / "manifest.tsv"
    write_manifest(manifest_path, DatasetManifest(records=records))

    means = draw_component_means(k_true, dim, seed=77)
    corpus, _ = generate_synthetic(
        SyntheticSpec(n=n, f_d=dim, k_true=k_true, imbalance=1.2,
                      noise_fraction=0.05, seed=77),
        means=means,
    )
    corpus = EmbeddingMatrix(ids=[rec.id for rec in records], data=corpus.data)
    corpus_path = root / "corpus.bin"
    write_embeddings(corpus, corpus_path)

    reference, _ = generate_synthetic(
        SyntheticSpec(n=1500, f_d=dim, k_true=k_true, seed=78), means=means
    )
    reference_path = root / "reference.bin"
    write_embeddings(reference, reference_path)
    return {"root": root, "manifest": manifest_path, "corpus": corpus_path,
            "reference": reference_path, "n": n}


def _primary_config(paths, out_dir, workers=1, seed=0) -> PipelineConfig:
    return PipelineConfig(
        manifest_path=str(paths["manifest"]),
        out_dir=str(out_dir),
        embeddings_path=str(paths["corpus"]),
        reference_embeddings_path=str(paths["reference"]),
        entropy=EntropyConfig(mode="top_fraction", keep_fraction=0.3),
        cluster=ClusterConfig(k=200, seed=derive_seed(seed, "cluster")),
        pruning_ratio=0.85,
        seed=seed,
        workers=workers,
    )


# --- the gate ---------------------------------------------------------------


def test_c01_entropy_matches_arbitrary_precision_oracle():
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    cfg = EntropyConfig(mode="threshold", tau=0.0)
    worst = 0.0
    for _ in range(1000):
        h_px = int(2 ** rng.uniform(0, 8))
        w_px = int(2 ** rng.uniform(0, 8))
        bands = int(rng.choice([1, 3, 4]))
        shape = (h_px, w_px) if bands == 1 else (h_px, w_px, bands)
        image = rng.integers(0, 256, size=shape, dtype=np.uint8)
        h = grayscale_histogram(image, cfg)
        got = shannon_entropy(h)
        want = entropy_oracle_bits(h.counts)
        worst = max(worst, abs(got - want))
    assert worst <= 1e-9, f"max |H - oracle| = {worst:.3e} bits"

    flat = grayscale_histogram(np.full((33, 21), 144, dtype=np.uint8), cfg)
    assert shannon_entropy(flat) == 0.0
    uniform = grayscale_histogram(
        np.arange(256, dtype=np.uint8).reshape(16, 16), cfg
    )
    assert shannon_entropy(uniform) == 8.0

    elapsed = time.perf_counter() - start
    assert elapsed < 30.0, f"took {elapsed:.1f}s"
    _report(f"entropy within 1e-9 of oracle on 1000 rasters ({elapsed:.1f}s)")


def test_c02_pruning_rules_match_enumeration():
    start = time.perf_counter()
    rng = np.random.default_rng(202)
    scores = {
        f"s{i:05d}": float(round(rng.uniform(0.0, 8.0), 2)) for i in range(10_000)
    }
    for tau in (0.0, 1.37, 4.0, 7.99, 9.0):
        brute = {i for i, bits in scores.items() if bits >= tau}
        assert apply_threshold(scores, tau) == brute
    for fraction in (0.001, 0.25, 0.3, 0.5, 1.0):
        n_keep = math.ceil(fraction * len(scores))
        ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
        brute = {i for i, _ in ranked[:n_keep]}
        got = apply_top_fraction(scores, fraction)
        assert got == brute
        assert len(got) == n_keep
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0, f"took {elapsed:.1f}s"
    _report(f"stage-I rules match enumeration on 10k scores ({elapsed:.1f}s)")


def test_c03_clustering_monotone_accurate_and_fixed_point():
    start = time.perf_counter()
    rng = np.random.default_rng(303)
    for trial in range(100):
        n = int(rng.integers(30, 200))
        dim = int(rng.integers(4, 17))
        k = int(rng.integers(2, 9))
        m = l2_normalize(EmbeddingMatrix(
            ids=[f"r{trial:03d}_{i:04d}" for i in range(n)],
            data=rng.normal(size=(n, dim)).astype(np.float32),
        ))
        c = spherical_kmeans(m, ClusterConfig(k=k, seed=trial, max_iters=25))
        hist = np.asarray(c.meta.history)
        assert hist.size >= 1
        assert np.all(np.diff(hist) >= 0.0), f"objective dipped: {hist}"

    basis, _ = np.linalg.qr(np.random.default_rng(5).normal(size=(32, 32)))
    means = np.ascontiguousarray(basis.T[:8])
    m, labels = generate_synthetic(
        SyntheticSpec(n=800, f_d=32, k_true=8, spread=0.05, seed=9), means=means
    )
    c = spherical_kmeans(m, ClusterConfig(k=8, seed=1))
    got = assign_nearest(m, c).label
    assert adjusted_rand_score(labels, got) >= 0.99

    n = 24
    m = l2_normalize(EmbeddingMatrix(
        ids=[f"p{i:03d}" for i in range(n)],
        data=np.random.default_rng(6).normal(size=(n, 12)).astype(np.float32),
    ))
    c = spherical_kmeans(m, ClusterConfig(k=n, seed=0))
    table = assign_nearest(m, c)
    assert len(set(table.label.tolist())) == n  # every row is its own cluster
    np.testing.assert_allclose(table.sim, 1.0, atol=1e-6)  # centroid == row

    elapsed = time.perf_counter() - start
    assert elapsed < 120.0, f"took {elapsed:.1f}s"
    _report(f"clustering monotone on 100 instances, ARI>=0.99, N=K fixed point ({elapsed:.1f}s)")


def test_c04_assignment_matches_brute_force():
    start = time.perf_counter()
    rng = np.random.default_rng(404)
    for trial in range(10):
        m = l2_normalize(EmbeddingMatrix(
            ids=[f"a{trial}_{i:05d}" for i in range(1000)],
            data=rng.normal(size=(1000, 64)).astype(np.float32),
        ))
        raw = rng.normal(size=(50, 64))
        raw /= np.linalg.norm(raw, axis=1, keepdims=True)
        c = CentroidSet(centroids=raw.astype(np.float32))
        table = assign_nearest(m, c)
        sims = m.data.astype(np.float64) @ c.centroids.astype(np.float64).T
        np.testing.assert_array_equal(table.label, np.argmax(sims, axis=1))
        np.testing.assert_allclose(table.sim, np.max(sims, axis=1), atol=1e-5)
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0, f"took {elapsed:.1f}s"
    _report(f"assignment exact vs brute force on 1000x50x64 instances ({elapsed:.1f}s)")


def test_c05_sampler_matches_transcribed_rule():
    start = time.perf_counter()
    rng = np.random.default_rng(505)
    for trial in range(500):
        n = int(rng.integers(1, 101))
        k = int(rng.integers(1, 6))
        ids = [f"t{trial:03d}_{i:03d}" for i in range(n)]
        labels = rng.integers(0, k, size=n)
        sims = np.round(rng.uniform(-1.0, 1.0, size=n), 2)
        if trial % 3 == 0 and k > 1:
            budget = int(rng.integers(1, k))  # B < K: quota is zero
        elif trial % 3 == 1:
            budget = int(rng.integers(n, n + 20))  # B >= N: take everything
        else:
            budget = int(rng.integers(1, 101))
        table = AssignmentTable(ids=ids, label=labels, sim=sims, k=k)
        result = stratified_select(pool_by_cluster(table), SamplingConfig(budget=budget))
        want = selection_oracle(
            list(zip(ids, labels.tolist(), sims.tolist())), k, budget
        )
        assert set(result.ids()) == want
        assert len(result.entries) == min(budget, n)
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0, f"took {elapsed:.1f}s"
    _report(f"sampler matches transcribed rule on 500 instances ({elapsed:.1f}s)")


def test_c06_pipeline_output_independent_of_workers(corpus10k, tmp_path):
    a = run_pipeline(_primary_config(corpus10k, tmp_path / "w1", workers=1))
    b = run_pipeline(_primary_config(corpus10k, tmp_path / "w8", workers=8))
    bytes_a = (tmp_path / "w1" / SELECTION_FILE).read_bytes()
    bytes_b = (tmp_path / "w8" / SELECTION_FILE).read_bytes()
    assert bytes_a == bytes_b
    assert a.ids() == b.ids()
    _report(f"pipeline selection byte-identical at workers=1 vs 8 ({len(a.entries)} rows)")


def test_c07_assignment_scales_linearly():
    start = time.perf_counter()
    report = run_scaling_study(
        sizes=[100_000, 200_000, 400_000], k=200, f_d=128, seed=11, repeats=5
    )
    slope = report.values["assign_slope"]
    r2 = report.values["assign_r2"]
    ratio = report.values["k_doubling_ratio"]
    elapsed = time.perf_counter() - start
    assert 0.9 <= slope <= 1.15, f"slope {slope:.3f}"
    assert r2 >= 0.98, f"R^2 {r2:.4f}"
    assert 1.7 <= ratio <= 2.3, f"k-doubling ratio {ratio:.2f}"
    assert elapsed < 300.0, f"took {elapsed:.1f}s"
    _report(
        f"assignment slope {slope:.3f}, R^2 {r2:.3f}, k-doubling x{ratio:.2f} ({elapsed:.0f}s)"
    )


def test_c08_reference_guidance_beats_full_corpus_clustering():
    means = draw_component_means(32, 32, seed=21)
    corpus, _ = generate_synthetic(
        SyntheticSpec(n=1_000_000, f_d=32, k_true=32, imbalance=1.0,
                      noise_fraction=0.05, seed=21),
        means=means,
    )
    reference, _ = generate_synthetic(
        SyntheticSpec(n=50_000, f_d=32, k_true=32, seed=22), means=means
    )
    report = reference_vs_full_study(
        corpus, reference, k=100, max_iters=20, budget=150_000, seed=5
    )
    ratio = report.values["time_ratio"]
    assert ratio <= 0.25, f"guided/full time ratio {ratio:.3f}"
    assert report.values["selected"] == 150_000
    _report(
        "reference-guided stage II ran at "
        f"{ratio:.2f}x the cost of clustering 1e6 rows directly"
    )


def test_c09_recall_beats_random_at_85_percent_pruning():
    n, k_true, dim = 4000, 30, 32
    budget = round(0.15 * n)  # 85% pruned overall
    wins = 0
    for trial in range(20):
        means = draw_component_means(k_true, dim, seed=900 + trial)
        corpus, labels = generate_synthetic(
            SyntheticSpec(n=n, f_d=dim, k_true=k_true, imbalance=2.0,
                          noise_fraction=0.05, seed=1000 + trial),
            means=means,
        )
        reference, _ = generate_synthetic(
            SyntheticSpec(n=1200, f_d=dim, k_true=k_true, seed=2000 + trial),
            means=means,
        )
        centroids = spherical_kmeans(reference, ClusterConfig(k=45, seed=3000 + trial))
        pools = pool_by_cluster(assign_nearest(corpus, centroids))
        ours = stratified_select(pools, SamplingConfig(budget=budget))
        rand = random_select(synthetic_manifest(corpus), budget, seed=4000 + trial)
        r_ours = component_recall(ours.ids(), labels, corpus.ids)
        r_rand = component_recall(rand.ids(), labels, corpus.ids)
        wins += r_ours > r_rand  # a tie is not a win
    assert wins >= 18, f"won {wins}/20 trials"
    _report(f"quota sampling beat random recall in {wins}/20 imbalanced trials")


def test_c10_shipped_config_reproduces_reference_operating_point(corpus10k, tmp_path):
    shipped = parse_config_text(
        (CONFIG_DIR / "example_run.cfg").read_text(), "example_run.cfg"
    )
    assert shipped["entropy.keep_fraction"] == "0.3"
    assert shipped["sampling.pruning_ratio"] == "0.85"
    assert shipped["cluster.k"] == "200"

    settings = [
        f"{key} = {value}" for key, value in shipped.items()
        if not key.startswith("paths.")
    ]
    path = write_config_file(tmp_path / "run.cfg", settings + [
        f"paths.manifest = {corpus10k['manifest']}",
        f"paths.embeddings = {corpus10k['corpus']}",
        f"paths.reference_embeddings = {corpus10k['reference']}",
        f"paths.out_dir = {tmp_path / 'out'}",
    ])
    result = run_pipeline(validate_config(path))
    n = corpus10k["n"]
    want = round((1 - 0.85) * n)
    assert want == 1500
    assert len(result.entries) == want
    stats = read_selection_stats(tmp_path / "out" / STATS_FILE)
    assert stats["selected"] == "1500"
    _report("shipped config selects exactly round(0.15*N) = 1500 of 10000")
