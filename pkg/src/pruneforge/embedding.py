"""Bit-exact binary interchange format for embedding matrices.

Layout: 8-byte magic ``PRNFRG01``, u32 little-endian version (=1), u64 row
count N, u32 feature dimension f_d, u32 reserved (=0), then N*f_d
little-endian float32 values row-major. Ids live in a ``<path>.ids``
sidecar, one per line, line i aligned with row i, so the numeric block
stays memory-mappable.

Rows are unit-normalized with l2_normalize before any cosine math; an
all-zero row is an upstream extractor failure and raises instead of being
dropped silently.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DegenerateInputError, FormatError, ValidationError
from ._util import atomic_write_bytes, atomic_write_text

MAGIC = b"PRNFRG01"
VERSION = 1
_HEADER = struct.Struct("<8sIQII")  # magic, version, N, f_d, reserved
HEADER_SIZE = _HEADER.size  # 28 bytes


@dataclass
class EmbeddingMatrix:
    """N x f_d float32 matrix with an aligned, unique id per row."""

    ids: list[str]
    data: np.ndarray

    def __post_init__(self) -> None:
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 2:
            raise ValidationError(f"embedding data must be 2-D, got shape {self.data.shape}")
        if len(self.ids) != self.data.shape[0]:
            raise ValidationError(
                f"{len(self.ids)} ids for {self.data.shape[0]} rows"
            )
        seen = set()
        for rec_id in self.ids:
            if not rec_id:
                raise ValidationError("empty id in embedding matrix")
            if "\t" in rec_id or "\n" in rec_id or "\r" in rec_id:
                raise ValidationError(f"id {rec_id!r} contains tab or newline")
            if rec_id in seen:
                raise ValidationError(f"duplicate id {rec_id!r} in embedding matrix")
            seen.add(rec_id)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    @property
    def ids_array(self) -> np.ndarray:
        """ids as a numpy unicode array, built once and cached."""
        cached = getattr(self, "_ids_array", None)
        if cached is None or cached.shape[0] != len(self.ids):
            cached = np.asarray(self.ids, dtype=np.str_)
            self._ids_array = cached
        return cached

    def __len__(self) -> int:
        return self.n


def check_unit_norms(data: np.ndarray, tol: float = 1e-4, what: str = "matrix") -> None:
    """Precondition guard for cosine math: every row norm within tol of 1.

    Sums of squares run in the input dtype: a float32 accumulation is good
    to ~1e-6 over any realistic row length, far inside the gate tolerance,
    and avoids materializing a float64 copy of the whole matrix.
    """
    if data.shape[0] == 0:
        return
    norms = np.sqrt(np.einsum("ij,ij->i", data, data).astype(np.float64))
    off = np.abs(norms - 1.0)
    worst = int(np.argmax(off))
    if off[worst] > tol:
        raise ValidationError(
            f"{what} row {worst} has norm {norms[worst]:.6f}; normalize first"
        )


def ensure_unit_norms(m: EmbeddingMatrix, tol: float = 1e-4, what: str = "matrix") -> None:
    """check_unit_norms, memoized per matrix.

    Embedding matrices are treated as immutable everywhere in this package,
    so one full pass at a tolerance also covers any later call at the same
    or a looser tolerance.
    """
    passed = getattr(m, "_unit_tol_ok", None)
    if passed is not None and passed <= tol:
        return
    check_unit_norms(m.data, tol=tol, what=what)
    m._unit_tol_ok = tol


def l2_normalize(m: EmbeddingMatrix) -> EmbeddingMatrix:
    """Divide each row by its Euclidean norm (computed in float64)."""
    data = m.data.astype(np.float64)
    norms = np.linalg.norm(data, axis=1)
    bad = np.flatnonzero(norms < 1e-12)
    if bad.size:
        raise DegenerateInputError(
            f"zero-norm embedding for id {m.ids[int(bad[0])]!r} ({bad.size} total)"
        )
    out = (data / norms[:, None]).astype(np.float32)
    return EmbeddingMatrix(ids=list(m.ids), data=out)


def write_embeddings(
    m: EmbeddingMatrix, path: str | os.PathLike, require_unit_norm: bool = False
) -> None:
    """Write matrix + id sidecar atomically; identical input → identical bytes.

    Norms are only validated when require_unit_norm is set, so raw
    pre-normalization dumps can use the same writer.
    """
    if require_unit_norm:
        ensure_unit_norms(m, tol=1e-5, what="embedding")
    header = _HEADER.pack(MAGIC, VERSION, m.n, m.dim, 0)
    payload = np.ascontiguousarray(m.data, dtype="<f4").tobytes(order="C")
    atomic_write_bytes(path, header + payload)
    atomic_write_text(str(os.fspath(path)) + ".ids", "".join(i + "\n" for i in m.ids))


def read_embeddings(path: str | os.PathLike, mmap: bool = False) -> EmbeddingMatrix:
    """Read a matrix; mmap=True maps the payload instead of loading it."""
    path = os.fspath(path)
    file_size = os.path.getsize(path)
    if file_size < HEADER_SIZE:
        raise FormatError(f"{path}: file shorter than the {HEADER_SIZE}-byte header")
    with open(path, "rb") as fh:
        magic, version, n, dim, reserved = _HEADER.unpack(fh.read(HEADER_SIZE))
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}, expected {VERSION}")
    if reserved != 0:
        raise FormatError(f"{path}: reserved header field must be 0, got {reserved}")
    expected = HEADER_SIZE + 4 * n * dim
    if file_size != expected:
        raise FormatError(
            f"{path}: header claims {n} x {dim} rows ({expected} bytes) but file has {file_size}"
        )

    ids_path = path + ".ids"
    if not os.path.exists(ids_path):
        raise DataError(f"{path}: id sidecar {ids_path} missing")
    with open(ids_path, "r", encoding="utf-8") as fh:
        ids = [line.rstrip("\n").rstrip("\r") for line in fh]
    if ids and ids[-1] == "":
        ids.pop()
    if len(ids) != n:
        raise ValidationError(f"{ids_path}: {len(ids)} ids for {n} rows")

    if n == 0:
        data = np.empty((0, dim), dtype=np.float32)
    elif mmap:
        data = np.memmap(path, dtype="<f4", mode="r", offset=HEADER_SIZE, shape=(n, dim))
    else:
        with open(path, "rb") as fh:
            fh.seek(HEADER_SIZE)
            data = np.fromfile(fh, dtype="<f4", count=n * dim).reshape(n, dim)
    return EmbeddingMatrix(ids=ids, data=data)


def concat_embeddings(parts: list[EmbeddingMatrix]) -> EmbeddingMatrix:
    """Stack several matrices (e.g. multiple reference sets) into one."""
    if not parts:
        raise ValidationError("nothing to concatenate")
    dim = parts[0].dim
    for p in parts[1:]:
        if p.dim != dim:
            raise ValidationError(f"dimension mismatch: {dim} vs {p.dim}")
    ids: list[str] = []
    for p in parts:
        ids.extend(p.ids)
    return EmbeddingMatrix(ids=ids, data=np.concatenate([p.data for p in parts], axis=0))
