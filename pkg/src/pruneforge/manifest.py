"""Dataset manifests and selection files.

Plain TSV on disk so corpora can be assembled with shell tools:

* manifest rows:  id, uri, width, height, bands, then alternating
  tag key / tag value columns (zero or more pairs)
* selection rows: id, stage, cluster, rank_in_cluster, similarity,
  entropy_bits, with "-" for fields that do not apply

Both writers are atomic (temp file + rename) and byte-deterministic:
writing the same data twice yields identical files.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
import os

from .errors import ParseError, ValidationError
from ._util import atomic_write_text

SELECTION_STAGES = ("entropy", "cluster_sample", "baseline")

_MISSING = "-"


@dataclass
class SampleRecord:
    """One image in a corpus. Width/height in pixels, bands 0 when unknown."""

    id: str
    uri: str
    width: int
    height: int
    bands: int = 0
    tags: dict[str, str] = field(default_factory=dict)

    def validate(self) -> None:
        if not self.id:
            raise ValidationError("record id must be non-empty")
        for ch in ("\t", "\n", "\r"):
            if ch in self.id:
                raise ValidationError(f"record id {self.id!r} contains tab or newline")
        if self.width <= 0 or self.height <= 0:
            raise ValidationError(f"record {self.id!r}: width and height must be positive")
        if self.bands < 0:
            raise ValidationError(f"record {self.id!r}: bands must be >= 0")


@dataclass
class DatasetManifest:
    """An ordered list of records with unique ids."""

    records: list[SampleRecord]
    source_label: str | None = None  # informational only, never serialized

    def __post_init__(self) -> None:
        self._by_id: dict[str, SampleRecord] = {}
        for rec in self.records:
            rec.validate()
            if rec.id in self._by_id:
                raise ValidationError(f"duplicate record id {rec.id!r}")
            self._by_id[rec.id] = rec

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def get(self, rec_id: str) -> SampleRecord | None:
        return self._by_id.get(rec_id)

    def ids(self) -> list[str]:
        return [rec.id for rec in self.records]

    def subset(self, keep_ids) -> "DatasetManifest":
        """New manifest containing only *keep_ids*, in the original record order."""
        wanted = set(keep_ids)
        missing = wanted - set(self._by_id)
        if missing:
            shown = ", ".join(sorted(missing)[:10])
            raise ValidationError(f"{len(missing)} id(s) not in manifest: {shown}")
        return DatasetManifest(
            records=[rec for rec in self.records if rec.id in wanted],
            source_label=self.source_label,
        )


def _parse_int(raw: str, what: str, lineno: int, path: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ParseError(f"{path}:{lineno}: {what} is not an integer: {raw!r}") from None


def load_manifest(path: str | os.PathLike, source_label: str | None = None) -> DatasetManifest:
    """Read a manifest TSV. Blank lines and lines starting with '#' are skipped."""
    path = os.fspath(path)
    records: list[SampleRecord] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) < 5:
                raise ParseError(
                    f"{path}:{lineno}: expected at least 5 tab-separated columns, got {len(cols)}"
                )
            if (len(cols) - 5) % 2 != 0:
                raise ParseError(
                    f"{path}:{lineno}: tag columns must come in key/value pairs"
                )
            tags: dict[str, str] = {}
            for i in range(5, len(cols), 2):
                key = cols[i]
                if not key:
                    raise ParseError(f"{path}:{lineno}: empty tag key")
                if key in tags:
                    raise ParseError(f"{path}:{lineno}: duplicate tag key {key!r}")
                tags[key] = cols[i + 1]
            rec = SampleRecord(
                id=cols[0],
                uri=cols[1],
                width=_parse_int(cols[2], "width", lineno, path),
                height=_parse_int(cols[3], "height", lineno, path),
                bands=_parse_int(cols[4], "bands", lineno, path),
                tags=tags,
            )
            try:
                rec.validate()
            except ValidationError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
            records.append(rec)
    try:
        return DatasetManifest(records=records, source_label=source_label)
    except ValidationError as exc:
        raise ParseError(f"{path}: {exc}") from None


def write_manifest(path: str | os.PathLike, manifest: DatasetManifest) -> None:
    lines = []
    for rec in manifest:
        cols = [rec.id, rec.uri, str(rec.width), str(rec.height), str(rec.bands)]
        # sorted tag order keeps the file byte-stable regardless of dict history
        for key in sorted(rec.tags):
            cols.append(key)
            cols.append(rec.tags[key])
        lines.append("\t".join(cols))
    atomic_write_text(path, "".join(line + "\n" for line in lines))


@dataclass
class SelectionEntry:
    """One kept sample with the evidence for why it was kept.

    Fields that do not apply to the producing stage stay None and are
    serialized as "-": entropy filtering fills entropy_bits only, cluster
    sampling fills cluster/rank_in_cluster/similarity, baselines fill
    whatever their strategy defines.
    """

    id: str
    stage: str
    cluster: int | None = None
    rank_in_cluster: int | None = None
    similarity: float | None = None
    entropy_bits: float | None = None

    def validate(self) -> None:
        if not self.id:
            raise ValidationError("selection entry id must be non-empty")
        if self.stage not in SELECTION_STAGES:
            raise ValidationError(
                f"entry {self.id!r}: stage must be one of {SELECTION_STAGES}, got {self.stage!r}"
            )
        if self.cluster is not None and self.cluster < 0:
            raise ValidationError(f"entry {self.id!r}: cluster must be >= 0")
        if self.rank_in_cluster is not None and self.rank_in_cluster < 0:
            raise ValidationError(f"entry {self.id!r}: rank_in_cluster must be >= 0")


def _fmt_opt_int(value: int | None) -> str:
    return _MISSING if value is None else str(value)


def _fmt_opt_float(value: float | None) -> str:
    return _MISSING if value is None else f"{value:.6f}"


def write_selection(path: str | os.PathLike, entries: list[SelectionEntry]) -> None:
    lines = []
    for entry in entries:
        entry.validate()
        lines.append(
            "\t".join(
                (
                    entry.id,
                    entry.stage,
                    _fmt_opt_int(entry.cluster),
                    _fmt_opt_int(entry.rank_in_cluster),
                    _fmt_opt_float(entry.similarity),
                    _fmt_opt_float(entry.entropy_bits),
                )
            )
        )
    atomic_write_text(path, "".join(line + "\n" for line in lines))


def _parse_opt_int(raw: str, what: str, lineno: int, path: str) -> int | None:
    if raw == _MISSING:
        return None
    return _parse_int(raw, what, lineno, path)


def _parse_opt_float(raw: str, what: str, lineno: int, path: str) -> float | None:
    if raw == _MISSING:
        return None
    try:
        return float(raw)
    except ValueError:
        raise ParseError(f"{path}:{lineno}: {what} is not a number: {raw!r}") from None


def read_selection(path: str | os.PathLike) -> list[SelectionEntry]:
    path = os.fspath(path)
    entries: list[SelectionEntry] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != 6:
                raise ParseError(f"{path}:{lineno}: expected 6 columns, got {len(cols)}")
            entry = SelectionEntry(
                id=cols[0],
                stage=cols[1],
                cluster=_parse_opt_int(cols[2], "cluster", lineno, path),
                rank_in_cluster=_parse_opt_int(cols[3], "rank_in_cluster", lineno, path),
                similarity=_parse_opt_float(cols[4], "similarity", lineno, path),
                entropy_bits=_parse_opt_float(cols[5], "entropy_bits", lineno, path),
            )
            try:
                entry.validate()
            except ValidationError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
            entries.append(entry)
    return entries
