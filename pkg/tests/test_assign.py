from __future__ import annotations

import numpy as np
import pytest

from pruneforge.assign import (
    AssignmentTable,
    CandidatePools,
    assign_nearest,
    pool_by_cluster,
    read_assignment,
    write_assignment,
)
from pruneforge.cluster import CentroidSet
from pruneforge.embedding import EmbeddingMatrix, l2_normalize
from pruneforge.errors import DataError, ParseError, ValidationError


def unit_rows(n, dim, seed=0, prefix="r"):
    rng = np.random.default_rng(seed)
    m = EmbeddingMatrix(
        ids=[f"{prefix}{i:05d}" for i in range(n)],
        data=rng.normal(size=(n, dim)).astype(np.float32),
    )
    return l2_normalize(m)


def table(ids, labels, sims, k):
    return AssignmentTable(
        ids=np.asarray(ids), label=np.asarray(labels), sim=np.asarray(sims, dtype=float), k=k
    )


class TestAssignmentTable:
    def test_label_range_enforced(self):
        with pytest.raises(ValidationError, match="labels"):
            table(["a"], [3], [0.5], k=3)

    def test_length_mismatch(self):
        with pytest.raises(ValidationError, match="equal length"):
            table(["a", "b"], [0], [0.5], k=1)

    def test_roundoff_sims_clipped(self):
        t = table(["a"], [0], [1.0000000001], k=1)
        assert t.sim[0] == 1.0

    def test_gross_sim_rejected(self):
        with pytest.raises(ValidationError, match="out of"):
            table(["a"], [0], [1.5], k=1)


class TestAssignNearest:
    def test_row_equal_to_centroid(self):
        cents = l2_normalize(
            EmbeddingMatrix(ids=list("abcd"), data=np.random.default_rng(0).normal(size=(4, 8)).astype(np.float32))
        ).data
        m = EmbeddingMatrix(ids=["x"], data=cents[3:4].copy())
        t = assign_nearest(m, CentroidSet(centroids=cents))
        assert t.label[0] == 3
        assert t.sim[0] == pytest.approx(1.0, abs=1e-6)

    def test_forced_arithmetic_on_basis_centroids(self):
        cents = np.eye(2, dtype=np.float32)
        m = EmbeddingMatrix(ids=["x"], data=np.array([[0.6, 0.8]], dtype=np.float32))
        t = assign_nearest(m, CentroidSet(centroids=cents))
        assert t.label[0] == 1
        assert t.sim[0] == pytest.approx(0.8, abs=1e-7)

    def test_matches_brute_force_oracle(self):
        m = unit_rows(400, 16, seed=1)
        cents = unit_rows(25, 16, seed=2, prefix="c").data
        t = assign_nearest(m, CentroidSet(centroids=cents))
        a = m.data.astype(np.float64)
        b = cents.astype(np.float64)
        for i in range(m.n):
            dots = b @ a[i]
            assert t.label[i] == int(np.argmax(dots))
            assert t.sim[i] == pytest.approx(float(dots.max()), abs=1e-12)

    def test_dim_mismatch(self):
        m = unit_rows(5, 4, seed=3)
        with pytest.raises(DataError, match="mismatch"):
            assign_nearest(m, CentroidSet(centroids=unit_rows(2, 6, seed=4).data))

    def test_unnormalized_rows_rejected(self):
        m = EmbeddingMatrix(ids=["a"], data=np.array([[0.5, 0.5]], dtype=np.float32))
        with pytest.raises(ValidationError, match="normalize"):
            assign_nearest(m, CentroidSet(centroids=np.eye(2, dtype=np.float32)))

    def test_labels_invariant_under_centroid_rescaling(self):
        m = unit_rows(100, 8, seed=5)
        raw = np.random.default_rng(6).normal(size=(10, 8)).astype(np.float32)
        c1 = CentroidSet(centroids=l2_normalize(EmbeddingMatrix(ids=[str(i) for i in range(10)], data=raw)).data)
        c2 = CentroidSet(
            centroids=l2_normalize(EmbeddingMatrix(ids=[str(i) for i in range(10)], data=raw * 7.3)).data
        )
        t1 = assign_nearest(m, c1)
        t2 = assign_nearest(m, c2)
        assert np.array_equal(t1.label, t2.label)


class TestPoolByCluster:
    def test_forced_partition(self):
        t = table(["a", "b", "c", "d", "e"], [0, 0, 1, 1, 1], [0.9, 0.5, 0.7, 0.8, 0.6], k=2)
        pools = pool_by_cluster(t)
        assert pools.sizes().tolist() == [2, 3]
        ids0, sims0 = pools.pool(0)
        assert ids0.tolist() == ["a", "b"]
        assert sims0.tolist() == [0.9, 0.5]
        ids1, sims1 = pools.pool(1)
        assert ids1.tolist() == ["d", "c", "e"]
        assert sims1.tolist() == [0.8, 0.7, 0.6]

    def test_single_label_leaves_other_pools_empty(self):
        t = table(["a", "b", "c"], [1, 1, 1], [0.3, 0.2, 0.1], k=4)
        pools = pool_by_cluster(t)
        assert pools.sizes().tolist() == [0, 3, 0, 0]
        assert pools.pool(0)[0].size == 0

    def test_equal_sims_tie_break_by_id(self):
        t = table(["z", "m", "a"], [0, 0, 0], [0.5, 0.5, 0.5], k=1)
        pools = pool_by_cluster(t)
        assert pools.pool(0)[0].tolist() == ["a", "m", "z"]

    def test_matches_partition_sort_oracle(self):
        rng = np.random.default_rng(7)
        n, k = 500, 6
        ids = [f"s{i:04d}" for i in range(n)]
        labels = rng.integers(0, k, size=n)
        sims = np.round(rng.uniform(-1, 1, size=n), 3)  # coarse: force ties
        pools = pool_by_cluster(table(ids, labels, sims, k=k))
        assert int(pools.sizes().sum()) == n
        for j in range(k):
            want = sorted(
                [(ids[i], sims[i]) for i in range(n) if labels[i] == j],
                key=lambda p: (-p[1], p[0]),
            )
            got_ids, got_sims = pools.pool(j)
            assert got_ids.tolist() == [w[0] for w in want]
            assert got_sims.tolist() == [w[1] for w in want]
            assert (np.diff(got_sims) <= 0).all()

    def test_offsets_validated(self):
        with pytest.raises(ValidationError, match="offsets"):
            CandidatePools(
                ids=np.asarray(["a"]), sims=np.asarray([0.5]), offsets=np.asarray([0, 2])
            )


class TestAssignmentIO:
    def test_round_trip(self, tmp_path):
        m = unit_rows(50, 8, seed=8)
        t = assign_nearest(m, CentroidSet(centroids=unit_rows(5, 8, seed=9, prefix="c").data))
        p = tmp_path / "assign.tsv"
        write_assignment(p, t)
        back = read_assignment(p)
        assert back.k == 5
        assert back.ids.tolist() == t.ids.tolist()
        assert np.array_equal(back.label, t.label)
        assert np.abs(back.sim - t.sim).max() <= 5e-7  # 6-decimal quantization

    def test_write_format(self, tmp_path):
        t = table(["a", "b"], [0, 1], [0.123456789, -0.5], k=2)
        p = tmp_path / "assign.tsv"
        write_assignment(p, t)
        assert p.read_text() == "# k\t2\na\t0\t0.123457\nb\t1\t-0.500000\n"

    def test_write_deterministic(self, tmp_path):
        t = table(["a", "b"], [0, 1], [0.25, 0.75], k=2)
        write_assignment(tmp_path / "x.tsv", t)
        write_assignment(tmp_path / "y.tsv", t)
        assert (tmp_path / "x.tsv").read_bytes() == (tmp_path / "y.tsv").read_bytes()

    def test_k_override_and_fallback(self, tmp_path):
        p = tmp_path / "assign.tsv"
        p.write_text("a\t0\t0.5\nb\t2\t0.25\n")  # no header
        t = read_assignment(p)
        assert t.k == 3  # max label + 1
        t8 = read_assignment(p, k=8)
        assert t8.k == 8

    def test_malformed_line_names_lineno(self, tmp_path):
        p = tmp_path / "assign.tsv"
        p.write_text("a\t0\n")
        with pytest.raises(ParseError, match=":1:"):
            read_assignment(p)

    def test_label_outside_k_rejected(self, tmp_path):
        p = tmp_path / "assign.tsv"
        p.write_text("# k\t2\na\t5\t0.5\n")
        with pytest.raises(ParseError, match="labels"):
            read_assignment(p)
