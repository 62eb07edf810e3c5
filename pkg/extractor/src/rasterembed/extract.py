"""The extraction run: manifest in, embedding container + sidecars out.

Row i of the output corresponds to the i-th manifest record that
decoded and encoded successfully; records that fail to decode are
skipped and logged to `<output>.rejects.tsv`. An encoder that cannot be
loaded aborts the run before any file is touched.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .binary import write_embedding_file, write_rejects_file
from .encoders import load_encoder, validate_raster
from .errors import ConfigError, DataError
from .manifest import ManifestRecord, read_manifest


@dataclass
class ExtractorConfig:
    manifest: str
    encoder: str
    output: str
    batch_size: int = 32
    device: str = "cpu"  # hint for accelerated encoders; built-ins ignore it
    normalize: bool = True

    def validate(self) -> None:
        if not self.manifest:
            raise ConfigError("manifest path is required")
        if not self.encoder:
            raise ConfigError("encoder identifier is required")
        if not self.output:
            raise ConfigError("output path is required")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if not self.device:
            raise ConfigError("device hint must be a non-empty string")


@dataclass
class ExtractResult:
    output: str
    ids: list[str]
    rejects: list[tuple[str, str]]
    width: int

    @property
    def rejects_path(self) -> str:
        return self.output + ".rejects.tsv"


def load_raster(record: ManifestRecord) -> np.ndarray:
    """Local path or file:// uri; .npy arrays or anything PIL can decode."""
    path = record.uri
    if path.startswith("file://"):
        path = path[len("file://"):]
    if path.endswith(".npy"):
        return np.load(path)
    from PIL import Image

    with Image.open(path) as img:
        return np.asarray(img)


def _normalize_rows(data: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(data.astype(np.float64), axis=1)
    if (norms < 1e-12).any():
        bad = int(np.flatnonzero(norms < 1e-12)[0])
        raise DataError(f"zero-norm embedding at output row {bad}")
    return (data.astype(np.float64) / norms[:, None]).astype(np.float32)


def extract_embeddings(cfg: ExtractorConfig, loader=load_raster) -> ExtractResult:
    cfg.validate()
    encoder = load_encoder(cfg.encoder)  # fatal if unavailable

    records = read_manifest(cfg.manifest)
    ids: list[str] = []
    rejects: list[tuple[str, str]] = []
    blocks: list[np.ndarray] = []

    batch_ids: list[str] = []
    batch_images: list[np.ndarray] = []

    def flush() -> None:
        if not batch_images:
            return
        encoded = np.asarray(encoder.encode_images(batch_images), dtype=np.float32)
        if encoded.shape != (len(batch_images), encoder.width):
            raise DataError(
                f"encoder {cfg.encoder!r} returned shape {encoded.shape}, "
                f"expected ({len(batch_images)}, {encoder.width})"
            )
        blocks.append(encoded)
        ids.extend(batch_ids)
        batch_ids.clear()
        batch_images.clear()

    for record in records:
        try:
            image = validate_raster(loader(record))
        except (KeyboardInterrupt, SystemExit):
            raise
        except Exception as exc:
            rejects.append((record.id, f"{type(exc).__name__}: {exc}"))
            continue
        batch_ids.append(record.id)
        batch_images.append(image)
        if len(batch_images) == cfg.batch_size:
            flush()
    flush()

    if not ids:
        raise DataError(f"no record in {cfg.manifest} produced an embedding")
    data = np.concatenate(blocks, axis=0)
    if cfg.normalize:
        data = _normalize_rows(data)

    result = ExtractResult(output=os.fspath(cfg.output), ids=ids, rejects=rejects, width=encoder.width)
    write_embedding_file(result.output, ids, data)
    write_rejects_file(result.rejects_path, rejects)
    return result
