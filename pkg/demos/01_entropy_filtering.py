"""
Stage I: score rasters by Shannon entropy and prune the dull ones
=================================================================

Builds a small on-disk corpus (some constant tiles, some textured),
scores every image in bits, then applies both pruning rules.
"""

from __future__ import annotations

import tempfile
from pathlib import Path

import numpy as np

from pruneforge import (
    DatasetManifest,
    EntropyConfig,
    SampleRecord,
    entropy_filter,
    grayscale_histogram,
    shannon_entropy,
)

root = Path(tempfile.mkdtemp(prefix="entropy_demo_"))
rng = np.random.default_rng(7)

# 12 tiles: even indices are flat (sea, cloud deck, sensor dropouts),
# odd indices carry texture worth keeping
records = []
for i in range(12):
    rec_id = f"tile{i:03d}"
    if i % 2 == 0:
        raster = np.full((32, 32), 90 + i, dtype=np.uint8)
    else:
        raster = rng.integers(0, 256, size=(32, 32, 3), dtype=np.uint8)
    path = root / f"{rec_id}.npy"
    np.save(path, raster)
    records.append(SampleRecord(rec_id, str(path), 32, 32, 1 if i % 2 == 0 else 3))
manifest = DatasetManifest(records=records)

# a single score, by hand: histogram over 256 gray levels, then bits
cfg = EntropyConfig(mode="threshold", tau=1.0)
h = grayscale_histogram(np.load(records[1].uri), cfg)
print(f"{records[1].id}: {shannon_entropy(h):.3f} bits over {h.total} pixels")

# rule 1: keep everything at or above a fixed bit threshold
kept, scores, rejects = entropy_filter(manifest, cfg)
print(f"threshold tau=1.0 keeps {len(kept)} of {len(manifest)}")

# rule 2: keep the top 25% by score, ties broken by ascending id
cfg = EntropyConfig(mode="top_fraction", keep_fraction=0.25)
kept, scores, rejects = entropy_filter(manifest, cfg)
print(f"top_fraction 0.25 keeps {len(kept)}: {[r.id for r in kept]}")

# every record was scored; nothing failed to load
print(f"{len(scores)} scored, {len(rejects)} rejects")
for rec in manifest:
    print(f"  {rec.id}  {scores[rec.id]:8.4f} bits")
