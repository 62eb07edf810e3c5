"""Reader for the corpus manifest interchange format.

One record per line: `id<TAB>uri<TAB>width<TAB>height<TAB>bands`, then
optional key/value tag pairs. Blank lines and `#` comments are skipped.
Only id and uri matter here; geometry columns are carried for the writer
side of the toolchain and validated no further than integer-ness.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from .errors import ParseError


@dataclass
class ManifestRecord:
    id: str
    uri: str
    width: int
    height: int
    bands: int
    tags: dict[str, str] = field(default_factory=dict)


def _parse_int(raw: str, what: str, lineno: int, path: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ParseError(f"{path}:{lineno}: {what} is not an integer: {raw!r}") from None


def read_manifest(path: str | os.PathLike) -> list[ManifestRecord]:
    path = os.fspath(path)
    records: list[ManifestRecord] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) < 5:
                raise ParseError(f"{path}:{lineno}: expected at least 5 columns, got {len(cols)}")
            if len(cols) % 2 == 0:  # 5 fixed columns plus key/value pairs
                raise ParseError(f"{path}:{lineno}: dangling tag key without a value")
            rec_id, uri = cols[0], cols[1]
            if not rec_id:
                raise ParseError(f"{path}:{lineno}: empty id")
            if rec_id in seen:
                raise ParseError(f"{path}:{lineno}: duplicate id {rec_id!r}")
            seen.add(rec_id)
            tags = {}
            for i in range(5, len(cols), 2):
                tags[cols[i]] = cols[i + 1]
            records.append(
                ManifestRecord(
                    id=rec_id,
                    uri=uri,
                    width=_parse_int(cols[2], "width", lineno, path),
                    height=_parse_int(cols[3], "height", lineno, path),
                    bands=_parse_int(cols[4], "bands", lineno, path),
                    tags=tags,
                )
            )
    return records
