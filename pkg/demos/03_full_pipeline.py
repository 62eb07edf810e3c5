"""
End to end: manifest + embeddings + config file -> pruned selection
===================================================================

Writes a complete toy corpus to disk (rasters, manifest, binary
embeddings, a run config), executes both stages through the same
entry point the CLI uses, then reruns to show stage resumption.
"""

from __future__ import annotations

import tempfile
from pathlib import Path

import numpy as np

from pruneforge import (
    DatasetManifest,
    EmbeddingMatrix,
    SELECTION_FILE,
    SampleRecord,
    SyntheticSpec,
    draw_component_means,
    generate_synthetic,
    read_selection,
    run_pipeline,
    validate_config,
    write_embeddings,
    write_manifest,
)

root = Path(tempfile.mkdtemp(prefix="pipeline_demo_"))
rng = np.random.default_rng(5)
n = 400

# rasters and the tab-separated manifest that catalogs them
records = []
for i in range(n):
    rec_id = f"img{i:04d}"
    path = root / f"{rec_id}.npy"
    if i % 4 == 0:
        np.save(path, np.full((8, 8), 50, dtype=np.uint8))  # flat, low entropy
    else:
        np.save(path, rng.integers(0, 256, size=(8, 8), dtype=np.uint8))
    records.append(SampleRecord(rec_id, str(path), 8, 8, 1))
write_manifest(root / "manifest.tsv", DatasetManifest(records=records))

# unit-norm embeddings for the corpus and a small trusted reference set,
# drawn around the same component directions
means = draw_component_means(k_true=5, f_d=16, seed=2)
corpus, _ = generate_synthetic(SyntheticSpec(n=n, f_d=16, k_true=5, seed=3), means)
corpus = EmbeddingMatrix(ids=[r.id for r in records], data=corpus.data)
write_embeddings(corpus, root / "corpus.bin")

reference, _ = generate_synthetic(SyntheticSpec(n=120, f_d=16, k_true=5, seed=4), means)
write_embeddings(reference, root / "reference.bin")

# the same plain-text config the CLI reads; relative paths resolve
# against the directory holding the config file
(root / "run.cfg").write_text(
    "paths.manifest = manifest.tsv\n"
    "paths.embeddings = corpus.bin\n"
    "paths.reference_embeddings = reference.bin\n"
    "paths.out_dir = out\n"
    "entropy.mode = top_fraction\n"
    "entropy.keep_fraction = 0.5\n"
    "cluster.k = 5\n"
    "sampling.pruning_ratio = 0.8\n"
    "run.seed = 0\n"
)

cfg = validate_config(root / "run.cfg")
result = run_pipeline(cfg, log=print)
print(f"selected {len(result.entries)} of {n} (80% pruned overall)")

# outputs are plain TSV; the selection file round-trips through the reader
entries = read_selection(Path(cfg.out_dir) / SELECTION_FILE)
first = entries[0]
print(f"first entry: {first.id} cluster={first.cluster} sim={first.similarity:.4f}")

# a second invocation finds the stage markers and skips the work
print("rerun:")
run_pipeline(cfg, log=print)
