"""Encoder registry and the built-in pixel-projection encoder.

An encoder is anything with a fixed `width` and an
`encode_images(images) -> (len(images), width) float32` method. The
registry maps identifier prefixes to factories so heavyweight towers
(CLIP-family vision encoders and the like) can be plugged in without
this package importing their frameworks.

The built-in `pixelproj-<width>` encoder needs no weights and no
accelerator: band-mean grayscale, bilinear resample to a fixed grid,
per-image standardization, then a fixed Gaussian projection seeded from
the identifier. It exists so the full extraction path (decode, batch,
normalize, serialize) is exercisable and reproducible anywhere; it is a
stand-in for a learned encoder, not a replacement.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import DataError, EncoderLoadError

GRID_SIDE = 16  # resample target; features = GRID_SIDE^2 pixels + mean, std, bias


def _identifier_seed(identifier: str) -> int:
    digest = hashlib.blake2b(identifier.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _value_span(dtype: np.dtype) -> float:
    if dtype == np.uint8:
        return 255.0
    if dtype == np.uint16:
        return 65535.0
    if dtype == np.uint32:
        return 4294967295.0
    if np.issubdtype(dtype, np.floating):
        return 1.0
    raise DataError(f"unsupported raster dtype {dtype}")


def validate_raster(image) -> np.ndarray:
    """Check an image is encodable: 2-D or 3-D, positive sizes, a supported
    dtype, finite values. Raises DataError otherwise; extraction treats
    that the same as a decode failure (skip and log)."""
    arr = np.asarray(image)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[0] < 1 or arr.shape[1] < 1 or arr.shape[2] < 1:
        raise DataError(f"raster must be HxW or HxWxB with positive sizes, got {arr.shape}")
    _value_span(arr.dtype)
    if np.issubdtype(arr.dtype, np.floating) and not np.isfinite(arr).all():
        raise DataError("raster contains non-finite values")
    return arr


@dataclass
class PixelProjectionEncoder:
    """Deterministic training-free image-to-vector map of a chosen width."""

    identifier: str
    width: int
    _projection: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.width < 1:
            raise EncoderLoadError(f"{self.identifier}: width must be >= 1")
        n_features = GRID_SIDE * GRID_SIDE + 3
        rng = np.random.default_rng(_identifier_seed(self.identifier))
        self._projection = rng.normal(size=(n_features, self.width)) / np.sqrt(n_features)

    def _features(self, image: np.ndarray) -> np.ndarray:
        arr = validate_raster(image)
        span = _value_span(arr.dtype)
        gray = arr.astype(np.float64).mean(axis=2) / span
        grid = Image.fromarray(gray.astype(np.float32), mode="F").resize(
            (GRID_SIDE, GRID_SIDE), Image.BILINEAR
        )
        pixels = np.asarray(grid, dtype=np.float64).ravel()
        mean = float(pixels.mean())
        std = float(pixels.std())
        flat = (pixels - mean) / (std + 1e-8)
        # mean/std/bias terms keep constant images away from the zero vector
        return np.concatenate([flat, [mean, std, 1.0]])

    def encode_images(self, images: list[np.ndarray]) -> np.ndarray:
        out = np.empty((len(images), self.width), dtype=np.float32)
        for i, image in enumerate(images):
            # one projection per row: the result is bit-identical no matter
            # how the caller groups images into batches
            out[i] = (self._features(image) @ self._projection).astype(np.float32)
        return out


def _pixelproj_factory(identifier: str) -> PixelProjectionEncoder:
    suffix = identifier.split("-", 1)
    if len(suffix) != 2 or not suffix[1].isdigit():
        raise EncoderLoadError(
            f"cannot parse encoder identifier {identifier!r}; expected pixelproj-<width>"
        )
    return PixelProjectionEncoder(identifier=identifier, width=int(suffix[1]))


_REGISTRY: dict[str, object] = {"pixelproj": _pixelproj_factory}


def register_encoder(prefix: str, factory) -> None:
    """Make `load_encoder` resolve identifiers starting with `prefix-`.

    The factory receives the full identifier and must return an object
    with `width` and `encode_images`.
    """
    if not prefix or "-" in prefix:
        raise EncoderLoadError(f"bad encoder prefix {prefix!r}")
    _REGISTRY[prefix] = factory


def load_encoder(identifier: str):
    prefix = identifier.split("-", 1)[0]
    factory = _REGISTRY.get(prefix)
    if factory is None:
        known = ", ".join(sorted(_REGISTRY))
        raise EncoderLoadError(f"unknown encoder {identifier!r}; registered: {known}")
    encoder = factory(identifier)
    if getattr(encoder, "width", 0) < 1 or not hasattr(encoder, "encode_images"):
        raise EncoderLoadError(f"{identifier!r}: factory returned an invalid encoder")
    return encoder
