"""Shared corpus-on-disk builders for pipeline and CLI tests."""

from __future__ import annotations

import numpy as np

from pruneforge.embedding import EmbeddingMatrix, l2_normalize, write_embeddings
from pruneforge.manifest import DatasetManifest, SampleRecord, write_manifest


def build_corpus_dir(root, n=40, dim=8, ref_n=16, seed=0):
    """A runnable input set: half constant rasters (0 bits), half random
    uint8 rasters (high entropy), embeddings for every record, and a
    separate reference embedding file. Returns the path map."""
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n):
        rec_id = f"img{i:05d}"
        raster = root / f"{rec_id}.npy"
        if i % 2 == 0:
            np.save(raster, np.full((8, 8), 7, dtype=np.uint8))
        else:
            np.save(raster, rng.integers(0, 256, size=(8, 8), dtype=np.uint8))
        records.append(SampleRecord(rec_id, str(raster), 8, 8, 1))
    manifest = DatasetManifest(records=records)
    manifest_path = root / "manifest.tsv"
    write_manifest(manifest_path, manifest)

    corpus = l2_normalize(
        EmbeddingMatrix(
            ids=[rec.id for rec in records],
            data=rng.normal(size=(n, dim)).astype(np.float32),
        )
    )
    corpus_path = root / "corpus.bin"
    write_embeddings(corpus, corpus_path)

    reference = l2_normalize(
        EmbeddingMatrix(
            ids=[f"ref{i:04d}" for i in range(ref_n)],
            data=rng.normal(size=(ref_n, dim)).astype(np.float32),
        )
    )
    reference_path = root / "reference.bin"
    write_embeddings(reference, reference_path)
    return {
        "manifest": manifest_path,
        "corpus": corpus_path,
        "reference": reference_path,
        "n": n,
    }


def write_config_file(path, lines):
    path.write_text("".join(f"{line}\n" for line in lines))
    return path
