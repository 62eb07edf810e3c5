from __future__ import annotations

import numpy as np
import pytest
from PIL import Image


def build_corpus(root, n=10, corrupt=(), npy=(2, 5)):
    """Write n rasters plus a manifest; indices in `corrupt` get garbage
    bytes, indices in `npy` become .npy arrays instead of PNGs."""
    rng = np.random.default_rng(101)
    lines = []
    for i in range(n):
        rec_id = f"img{i:04d}"
        if i in npy and i not in corrupt:
            path = root / f"{rec_id}.npy"
            np.save(path, rng.integers(0, 256, size=(24, 24), dtype=np.uint8))
            w = h = 24
            bands = 1
        else:
            path = root / f"{rec_id}.png"
            if i in corrupt:
                path.write_bytes(b"this is not an image")
            else:
                arr = rng.integers(0, 256, size=(20, 28, 3), dtype=np.uint8)
                Image.fromarray(arr, mode="RGB").save(path)
            w, h, bands = 28, 20, 3
        lines.append(f"{rec_id}\t{path}\t{w}\t{h}\t{bands}")
    manifest = root / "manifest.tsv"
    manifest.write_text("".join(line + "\n" for line in lines))
    return manifest


@pytest.fixture
def clean_corpus(tmp_path):
    return build_corpus(tmp_path, n=10)


@pytest.fixture
def corrupt_corpus(tmp_path):
    return build_corpus(tmp_path, n=10, corrupt=(4,))
