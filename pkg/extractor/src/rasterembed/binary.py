"""Writer for the embedding interchange container.

Layout: little-endian header `magic "PRNFRG01" | u32 version | u64 N |
u32 dim | u32 reserved(0)`, then N x dim float32 values row-major. Ids
live in a `<path>.ids` sidecar, one per line, i-th line naming row i.
Both files are written atomically (tmp + rename) so readers never see a
truncated container.
"""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

from .errors import DataError

MAGIC = b"PRNFRG01"
VERSION = 1
_HEADER = struct.Struct("<8sIQII")


def _atomic_write_bytes(path: str, payload: bytes) -> None:
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp_", suffix=".part")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_embedding_file(path: str | os.PathLike, ids: list[str], data: np.ndarray) -> None:
    """Write rows + id sidecar. data must be 2-D float32 with one row per id."""
    path = os.fspath(path)
    data = np.ascontiguousarray(data, dtype="<f4")
    if data.ndim != 2:
        raise DataError(f"embedding data must be 2-D, got shape {data.shape}")
    if data.shape[0] != len(ids):
        raise DataError(f"{data.shape[0]} rows but {len(ids)} ids")
    if data.shape[0] < 1:
        raise DataError("refusing to write an empty embedding file")
    for rec_id in ids:
        if not rec_id or "\t" in rec_id or "\n" in rec_id:
            raise DataError(f"id not serializable in the sidecar: {rec_id!r}")
    header = _HEADER.pack(MAGIC, VERSION, data.shape[0], data.shape[1], 0)
    _atomic_write_bytes(path, header + data.tobytes(order="C"))
    sidecar = "".join(i + "\n" for i in ids).encode("utf-8")
    _atomic_write_bytes(path + ".ids", sidecar)


def write_rejects_file(path: str | os.PathLike, rejects: list[tuple[str, str]]) -> None:
    """`id<TAB>reason` per skipped record; reasons collapsed to one line."""
    lines = []
    for rec_id, reason in rejects:
        clean = " ".join(str(reason).split())
        lines.append(f"{rec_id}\t{clean}\n")
    _atomic_write_bytes(os.fspath(path), "".join(lines).encode("utf-8"))
