"""Nearest-centroid assignment and per-cluster candidate pooling.

Every unlabeled sample gets a hard label (index of the most similar prior
centroid, ties to the smallest index) and the attained cosine similarity.
Pools regroup the samples per cluster, sorted by similarity descending with
ascending-id tie-break, ready for quota sampling.

The pool store is CSR-style: one sorted id array, one sorted sim array, and
a K+1 offsets array, so ten-million-row tables stay flat and cheap.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import DataError, ParseError, ValidationError
from .cluster import CentroidSet, argmax_similarity
from .embedding import EmbeddingMatrix, check_unit_norms, ensure_unit_norms
from ._util import atomic_write_text

# how far beyond [-1, 1] a similarity may fall before it is corrupt data
# rather than float roundoff
_SIM_SLACK = 1e-6


@dataclass
class AssignmentTable:
    """Per-sample cluster label and best similarity, aligned with ids."""

    ids: np.ndarray
    label: np.ndarray
    sim: np.ndarray
    k: int

    def __post_init__(self) -> None:
        self.ids = np.asarray(self.ids, dtype=np.str_)
        self.label = np.asarray(self.label, dtype=np.int64)
        self.sim = np.asarray(self.sim, dtype=np.float64)
        n = self.ids.shape[0]
        if self.label.shape != (n,) or self.sim.shape != (n,):
            raise ValidationError("ids, label, and sim must have equal length")
        if self.k < 1:
            raise ValidationError("k must be >= 1")
        if n and (self.label.min() < 0 or self.label.max() >= self.k):
            raise ValidationError(f"labels must lie in [0, {self.k})")
        if n:
            overshoot = np.abs(self.sim).max() - 1.0
            if overshoot > _SIM_SLACK:
                raise ValidationError(f"similarity out of [-1, 1] by {overshoot:.3g}")
            np.clip(self.sim, -1.0, 1.0, out=self.sim)

    @property
    def n(self) -> int:
        return self.ids.shape[0]


@dataclass
class CandidatePools:
    """K pools, flattened: pool k is rows [offsets[k], offsets[k+1])."""

    ids: np.ndarray
    sims: np.ndarray
    offsets: np.ndarray

    def __post_init__(self) -> None:
        self.offsets = np.asarray(self.offsets, dtype=np.int64)
        if self.offsets.ndim != 1 or self.offsets.shape[0] < 2:
            raise ValidationError("offsets must hold K+1 entries")
        if self.offsets[0] != 0 or self.offsets[-1] != self.ids.shape[0]:
            raise ValidationError("offsets must start at 0 and end at N")
        if (np.diff(self.offsets) < 0).any():
            raise ValidationError("offsets must be non-decreasing")

    @property
    def k(self) -> int:
        return self.offsets.shape[0] - 1

    @property
    def n(self) -> int:
        return self.ids.shape[0]

    def pool(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        s, e = self.offsets[j], self.offsets[j + 1]
        return self.ids[s:e], self.sims[s:e]

    def sizes(self) -> np.ndarray:
        return np.diff(self.offsets)


def assign_nearest(m: EmbeddingMatrix, c: CentroidSet, workers: int = 1) -> AssignmentTable:
    """Hard-assign each row to its most similar centroid."""
    if m.dim != c.dim:
        raise DataError(f"dimension mismatch: rows have {m.dim}, centroids {c.dim}")
    ensure_unit_norms(m, tol=1e-4, what="embedding")
    check_unit_norms(c.centroids, tol=1e-4, what="centroid")
    labels, sims = argmax_similarity(m.data, c.centroids.astype(np.float64), workers=workers)
    return AssignmentTable(ids=m.ids_array, label=labels, sim=sims, k=c.k)


def pool_by_cluster(t: AssignmentTable) -> CandidatePools:
    """Partition samples into per-cluster pools ordered for sampling.

    Order within a pool: similarity descending, then id ascending, so equal
    similarities (common after 6-decimal serialization) stay deterministic.
    """
    order = np.lexsort((t.ids, -t.sim, t.label))
    counts = np.bincount(t.label, minlength=t.k)
    offsets = np.zeros(t.k + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return CandidatePools(ids=t.ids[order], sims=t.sim[order], offsets=offsets)


def write_assignment(path: str | os.PathLike, t: AssignmentTable) -> None:
    """Lines of `id<TAB>label<TAB>sim` (6 decimals) after a `# k` header."""
    parts = [f"# k\t{t.k}\n"]
    for i in range(t.n):
        parts.append(f"{t.ids[i]}\t{t.label[i]}\t{t.sim[i]:.6f}\n")
    atomic_write_text(path, "".join(parts))


def read_assignment(path: str | os.PathLike, k: int | None = None) -> AssignmentTable:
    """Read a table; k comes from the header unless overridden."""
    path = os.fspath(path)
    ids: list[str] = []
    labels: list[int] = []
    sims: list[float] = []
    header_k = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                continue
            if line.startswith("#"):
                cols = line[1:].strip().split("\t")
                if len(cols) == 2 and cols[0] == "k":
                    try:
                        header_k = int(cols[1])
                    except ValueError:
                        raise ParseError(f"{path}:{lineno}: bad k header") from None
                continue
            cols = line.split("\t")
            if len(cols) != 3:
                raise ParseError(f"{path}:{lineno}: expected id<TAB>label<TAB>sim")
            try:
                labels.append(int(cols[1]))
                sims.append(float(cols[2]))
            except ValueError:
                raise ParseError(f"{path}:{lineno}: bad label or sim") from None
            ids.append(cols[0])
    if k is None:
        k = header_k
    if k is None:
        k = (max(labels) + 1) if labels else 1
    try:
        return AssignmentTable(
            ids=np.asarray(ids, dtype=np.str_),
            label=np.asarray(labels, dtype=np.int64),
            sim=np.asarray(sims, dtype=np.float64),
            k=k,
        )
    except ValidationError as exc:
        raise ParseError(f"{path}: {exc}") from None
