"""Out-of-band embedding extraction for the corpus-pruning toolchain.

Reads the manifest format, runs a pluggable image encoder in batches,
and writes the binary embedding interchange format (plus an id sidecar
and a rejects report). Run it once per corpus before pruning; the
pipeline itself never performs inference.
"""

from .binary import MAGIC, VERSION, write_embedding_file, write_rejects_file
from .encoders import (
    GRID_SIDE,
    PixelProjectionEncoder,
    load_encoder,
    register_encoder,
    validate_raster,
)
from .errors import (
    ConfigError,
    DataError,
    EncoderLoadError,
    ExtractorError,
    ParseError,
)
from .extract import ExtractorConfig, ExtractResult, extract_embeddings, load_raster
from .manifest import ManifestRecord, read_manifest

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DataError",
    "EncoderLoadError",
    "ExtractResult",
    "ExtractorConfig",
    "ExtractorError",
    "GRID_SIDE",
    "MAGIC",
    "ManifestRecord",
    "ParseError",
    "PixelProjectionEncoder",
    "VERSION",
    "extract_embeddings",
    "load_encoder",
    "load_raster",
    "read_manifest",
    "register_encoder",
    "validate_raster",
    "write_embedding_file",
    "write_rejects_file",
]
