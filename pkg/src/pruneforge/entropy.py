"""Stage I: grayscale Shannon entropy scoring and low-information pruning.

Each image is reduced to grayscale, histogrammed over L intensity levels
(default 256), and scored with H = -sum(p_k * log2(p_k)) in bits. Two
pruning rules:

* threshold     keep every image with H >= tau
* top_fraction  keep the ceil(keep_fraction * N) highest-entropy images,
                ties broken by ascending id

Scoring is pure per image, so records may be processed by any number of
workers; results are merged in manifest order and the outcome is identical
to sequential execution. Undecodable rasters are collected into a rejects
list (id, reason) and treated as pruned rather than aborting the run.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, DegenerateInputError, ParseError
from .manifest import DatasetManifest, SampleRecord
from ._util import atomic_write_text

GRAYSCALE_POLICIES = ("luma_601", "band_mean")
ENTROPY_MODES = ("threshold", "top_fraction")

# ITU-R BT.601 luma weights, applied to the first three bands
_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float64)


@dataclass
class Histogram:
    """Intensity counts over L levels. sum(counts) == total."""

    counts: np.ndarray
    total: int

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 1 or self.counts.shape[0] < 2:
            raise DataError("histogram needs at least 2 levels")
        if (self.counts < 0).any():
            raise DataError("histogram counts must be non-negative")
        if int(self.counts.sum()) != self.total:
            raise DataError("histogram counts do not sum to total")

    @property
    def levels(self) -> int:
        return int(self.counts.shape[0])


@dataclass
class EntropyConfig:
    """Pruning rule and grayscale reduction settings.

    Exactly one of tau / keep_fraction is active, matching mode. There is
    no default for either: the caller must choose a cut explicitly.
    """

    mode: str
    tau: float | None = None
    keep_fraction: float | None = None
    levels: int = 256
    grayscale_policy: str = "luma_601"

    def validate(self) -> None:
        if self.mode not in ENTROPY_MODES:
            raise ConfigError(f"entropy mode must be one of {ENTROPY_MODES}, got {self.mode!r}")
        if self.levels < 2:
            raise ConfigError("levels must be >= 2")
        if self.grayscale_policy not in GRAYSCALE_POLICIES:
            raise ConfigError(
                f"grayscale_policy must be one of {GRAYSCALE_POLICIES}, got {self.grayscale_policy!r}"
            )
        if self.mode == "threshold":
            if self.tau is None:
                raise ConfigError("threshold mode requires tau")
            if self.keep_fraction is not None:
                raise ConfigError("threshold mode must not set keep_fraction")
            if self.tau < 0:
                raise ConfigError("tau must be >= 0 bits")
        else:
            if self.keep_fraction is None:
                raise ConfigError("top_fraction mode requires keep_fraction")
            if self.tau is not None:
                raise ConfigError("top_fraction mode must not set tau")
            if not (0.0 < self.keep_fraction <= 1.0):
                raise ConfigError("keep_fraction must be in (0, 1]")


def _value_span(dtype: np.dtype) -> float:
    """Width of the representable value range, for linear quantization."""
    if dtype == np.uint8:
        return 256.0
    if dtype == np.uint16:
        return 65536.0
    if dtype == np.uint32:
        return 4294967296.0
    if np.issubdtype(dtype, np.floating):
        return 1.0  # float rasters are expected in [0, 1]
    raise DataError(f"unsupported raster dtype {dtype}")


def grayscale_histogram(image: np.ndarray, config: EntropyConfig) -> Histogram:
    """Reduce *image* to grayscale and histogram it over config.levels bins.

    Accepts HxW (single band) or HxWxB arrays. luma_601 weights the first
    three bands 0.299/0.587/0.114 and passes single-band input through;
    band_mean averages all bands and is the policy for 4-band imagery.
    """
    arr = np.asarray(image)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise DataError(f"expected HxW or HxWxB raster, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise DegenerateInputError("zero-pixel image")
    bands = arr.shape[2]
    if bands == 0:
        raise DegenerateInputError("image has no bands")

    span = _value_span(arr.dtype)
    policy = config.grayscale_policy
    if policy == "luma_601":
        if bands == 1:
            gray = arr[:, :, 0].astype(np.float64)
        elif bands >= 3:
            gray = arr[:, :, :3].astype(np.float64) @ _LUMA
        else:
            raise DataError("luma_601 needs 1 or >= 3 bands, got 2; use band_mean")
    else:
        gray = arr.astype(np.float64).mean(axis=2)

    levels = config.levels
    bins = np.floor(gray * (levels / span)).astype(np.int64)
    np.clip(bins, 0, levels - 1, out=bins)
    counts = np.bincount(bins.ravel(), minlength=levels)
    return Histogram(counts=counts, total=int(counts.sum()))


def shannon_entropy(h: Histogram) -> float:
    """H = -sum over occupied levels of p_k * log2(p_k), in bits."""
    if h.total <= 0:
        raise DegenerateInputError("histogram total is zero")
    occupied = h.counts[h.counts > 0]
    if occupied.shape[0] == 1:
        return 0.0
    p = occupied.astype(np.float64) / float(h.total)
    return float(-(p * np.log2(p)).sum())


def apply_threshold(scores: dict[str, float], tau: float) -> set[str]:
    """Rule: keep every id whose entropy is >= tau."""
    return {rec_id for rec_id, bits in scores.items() if bits >= tau}


def apply_top_fraction(scores: dict[str, float], keep_fraction: float) -> set[str]:
    """Rule: keep the ceil(keep_fraction * N) highest-entropy ids.

    N is the number of scored records. Ties in entropy break by ascending
    id so the kept set is identical across runs and platforms.
    """
    if not scores:
        return set()
    n_keep = math.ceil(keep_fraction * len(scores))
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return {rec_id for rec_id, _ in ranked[:n_keep]}


def load_raster(record: SampleRecord) -> np.ndarray:
    """Default loader: local path or file:// uri, .npy arrays or PIL images."""
    path = record.uri
    if path.startswith("file://"):
        path = path[len("file://"):]
    if path.endswith(".npy"):
        return np.load(path)
    from PIL import Image

    with Image.open(path) as img:
        return np.asarray(img)


def entropy_filter(
    manifest: DatasetManifest,
    config: EntropyConfig,
    loader=None,
    workers: int = 1,
) -> tuple[DatasetManifest, dict[str, float], list[tuple[str, str]]]:
    """Score every record and prune by the configured rule.

    Returns (kept manifest in original record order, all scores for audit,
    rejects as (id, reason) for records whose raster could not be scored).
    Rejected records are treated as pruned. The result is independent of
    *workers*.
    """
    config.validate()
    if loader is None:
        loader = load_raster

    def score_one(rec: SampleRecord):
        try:
            h = grayscale_histogram(loader(rec), config)
            return rec.id, shannon_entropy(h), None
        except Exception as exc:
            return rec.id, None, str(exc) or type(exc).__name__

    if workers <= 1:
        rows = [score_one(rec) for rec in manifest]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(score_one, manifest.records))

    scores: dict[str, float] = {}
    rejects: list[tuple[str, str]] = []
    for rec_id, bits, reason in rows:  # manifest order
        if reason is not None:
            rejects.append((rec_id, reason))
        else:
            scores[rec_id] = bits

    if config.mode == "threshold":
        keep = apply_threshold(scores, config.tau)
    else:
        keep = apply_top_fraction(scores, config.keep_fraction)
    return manifest.subset(keep), scores, rejects


def write_scores(path: str | os.PathLike, scores: dict[str, float]) -> None:
    """Sidecar: one `id<TAB>bits` line per scored record, 6 decimals."""
    atomic_write_text(path, "".join(f"{rec_id}\t{bits:.6f}\n" for rec_id, bits in scores.items()))


def read_scores(path: str | os.PathLike) -> dict[str, float]:
    path = os.fspath(path)
    scores: dict[str, float] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) != 2:
                raise ParseError(f"{path}:{lineno}: expected id<TAB>bits")
            try:
                scores[cols[0]] = float(cols[1])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: bits is not a number: {cols[1]!r}") from None
    return scores


def write_rejects(path: str | os.PathLike, rejects: list[tuple[str, str]]) -> None:
    """Sidecar: one `id<TAB>reason` line per unscorable record."""
    lines = []
    for rec_id, reason in rejects:
        clean = " ".join(str(reason).split())  # keep the file line-oriented
        lines.append(f"{rec_id}\t{clean}\n")
    atomic_write_text(path, "".join(lines))
