"""Tests for the temporal event store, CSV ingest and chronological splits."""

import math

import numpy as np
import pytest

from tfwaveformer.errors import (
    ContractError,
    DataFormatError,
    IngestError,
    NodeLookupError,
)
from tfwaveformer.graph import (
    TemporalGraphStore,
    ingest_csv,
    inductive_test_indices,
    make_split,
    partition_indices,
)


def random_store(rng, n_events=200, n_raw_nodes=30, d_e=3):
    src = rng.integers(100, 100 + n_raw_nodes, size=n_events)
    dst = rng.integers(100, 100 + n_raw_nodes, size=n_events)
    ts = np.sort(rng.uniform(0.0, 500.0, size=n_events))
    feats = rng.standard_normal((n_events, d_e)).astype(np.float32)
    return TemporalGraphStore(src, dst, ts, feats)


class TestStoreBasics:
    def test_ids_are_densified_from_one(self):
        store = TemporalGraphStore([10, 30], [20, 10], [1.0, 2.0])
        assert store.id_map == {10: 1, 20: 2, 30: 3}
        assert list(store.src) == [1, 3]
        assert list(store.dst) == [2, 1]
        assert store.n_nodes == 3

    def test_unsorted_timestamps_rejected(self):
        with pytest.raises(IngestError):
            TemporalGraphStore([1, 2], [2, 3], [5.0, 4.0])

    def test_event_accessor(self):
        store = TemporalGraphStore([1], [2], [3.5], np.ones((1, 2), dtype=np.float32))
        ev = store.event(0)
        assert (ev.src, ev.dst, ev.ts, ev.idx) == (1, 2, 3.5, 0)
        np.testing.assert_allclose(ev.edge_feat, [1.0, 1.0])


class TestRecentNeighbors:
    def test_matches_linear_scan_oracle(self):
        """50 random queries on a 200-event store against a brute-force scan."""
        rng = np.random.default_rng(42)
        store = random_store(rng)
        length = 7
        for _ in range(50):
            node = int(rng.integers(1, store.n_nodes + 1))
            t = float(rng.uniform(-10.0, 510.0))
            seq = store.recent_neighbors(node, t, length)

            hits = []
            for i in range(store.n_events):
                if store.ts[i] >= t:
                    continue
                if store.src[i] == node:
                    hits.append((float(store.ts[i]), int(store.dst[i]), i))
                elif store.dst[i] == node:
                    hits.append((float(store.ts[i]), int(store.src[i]), i))
            hits = hits[-length:]

            k = len(hits)
            assert int(seq.mask.sum()) == k
            assert not seq.mask[: length - k].any()
            for slot, (ts_i, other, ev_i) in zip(range(length - k, length), hits):
                assert seq.ts[slot] == ts_i
                assert seq.node_ids[slot] == other
                np.testing.assert_array_equal(
                    seq.edge_feats[slot], store.edge_feats[ev_i]
                )

    def test_padding_contract(self):
        store = TemporalGraphStore([1, 1], [2, 3], [1.0, 2.0])
        seq = store.recent_neighbors(1, 1.5, 4)
        # one valid entry, right-aligned; pads carry id 0 and zero delta
        assert list(seq.mask) == [False, False, False, True]
        assert list(seq.node_ids[:3]) == [0, 0, 0]
        np.testing.assert_allclose(seq.ts[:3], 1.5)
        np.testing.assert_allclose(seq.deltas[:3], 0.0)
        assert seq.deltas[3] == 0.5

    def test_strictly_before_query(self):
        rng = np.random.default_rng(9)
        store = random_store(rng, n_events=120)
        for _ in range(30):
            node = int(rng.integers(1, store.n_nodes + 1))
            t = float(rng.choice(store.ts))  # query exactly at an event time
            seq = store.recent_neighbors(node, t, 9)
            assert np.all(seq.ts[seq.mask] < t)
            valid = seq.ts[seq.mask]
            assert np.all(np.diff(valid) >= 0)

    def test_unknown_node_raises(self):
        store = TemporalGraphStore([1], [2], [0.0])
        with pytest.raises(NodeLookupError):
            store.recent_neighbors(99, 1.0, 4)
        with pytest.raises(NodeLookupError):
            store.recent_neighbors(0, 1.0, 4)


class TestIngest:
    def write(self, tmp_path, text):
        p = tmp_path / "events.csv"
        p.write_text(text)
        return p

    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        store = random_store(rng, n_events=60, d_e=2)
        path = tmp_path / "out.csv"
        store.to_csv(path)
        back = ingest_csv(path)
        np.testing.assert_array_equal(back.src, store.src)
        np.testing.assert_array_equal(back.dst, store.dst)
        np.testing.assert_array_equal(back.ts, store.ts)
        np.testing.assert_array_equal(back.edge_feats, store.edge_feats)
        assert back.id_map == store.id_map

    def test_minimal_header(self, tmp_path):
        p = self.write(tmp_path, "src,dst,ts\n5,6,1.0\n6,7,2.0\n")
        store = ingest_csv(p)
        assert store.n_events == 2
        assert store.d_e == 0
        assert store.edge_feats.shape == (2, 0)

    def test_label_column(self, tmp_path):
        p = self.write(tmp_path, "src,dst,ts,label\n1,2,0.5,1\n2,3,0.7,0\n")
        store = ingest_csv(p)
        np.testing.assert_allclose(store.labels, [1.0, 0.0])

    def test_label_and_features(self, tmp_path):
        p = self.write(
            tmp_path, "src,dst,ts,label,feat_0,feat_1\n1,2,0.5,0,0.25,-1\n"
        )
        store = ingest_csv(p)
        assert store.d_e == 2
        np.testing.assert_allclose(store.edge_feats, [[0.25, -1.0]])

    def test_unsorted_reports_line_number(self, tmp_path):
        p = self.write(tmp_path, "src,dst,ts\n1,2,5.0\n2,3,4.0\n")
        with pytest.raises(IngestError, match="line 3"):
            ingest_csv(p)

    def test_ragged_row_reports_line_number(self, tmp_path):
        p = self.write(tmp_path, "src,dst,ts,feat_0\n1,2,0.5,1.0\n1,2,0.6\n")
        with pytest.raises(DataFormatError, match="line 3"):
            ingest_csv(p)

    def test_bad_header_rejected(self, tmp_path):
        p = self.write(tmp_path, "source,target,time\n1,2,3\n")
        with pytest.raises(DataFormatError):
            ingest_csv(p)

    def test_bad_feature_names_rejected(self, tmp_path):
        p = self.write(tmp_path, "src,dst,ts,feat_1\n1,2,3,0.0\n")
        with pytest.raises(DataFormatError):
            ingest_csv(p)

    def test_non_numeric_cell_rejected(self, tmp_path):
        p = self.write(tmp_path, "src,dst,ts\n1,2,abc\n")
        with pytest.raises(DataFormatError, match="line 2"):
            ingest_csv(p)


class TestSplit:
    def test_boundary_percentile_oracle(self):
        """With 100 events, training ends exactly at event 70's timestamp."""
        ts = np.sort(np.random.default_rng(0).uniform(0, 100, size=100))
        store = TemporalGraphStore(
            np.ones(100, dtype=int), np.full(100, 2), ts
        )
        spec = make_split(store, 0.70, 0.15, inductive_fraction=0.0)
        assert spec.train_end_ts == ts[69]
        assert spec.val_end_ts == ts[84]

    def test_percentile_oracle_random_sizes(self):
        rng = np.random.default_rng(8)
        for n in [10, 37, 100, 251]:
            ts = np.sort(rng.uniform(0, 50, size=n))
            store = TemporalGraphStore(
                np.ones(n, dtype=int), np.full(n, 2), ts
            )
            spec = make_split(store, 0.70, 0.15, inductive_fraction=0.0)
            assert spec.train_end_ts == ts[math.ceil(0.70 * n) - 1]
            assert spec.val_end_ts == ts[math.ceil(0.85 * n) - 1]

    def test_every_event_in_exactly_one_partition(self):
        rng = np.random.default_rng(17)
        store = random_store(rng, n_events=173)
        spec = make_split(store, seed=3, inductive_fraction=0.0)
        parts = partition_indices(store, spec)
        merged = np.concatenate([parts["train"], parts["val"], parts["test"]])
        np.testing.assert_array_equal(np.sort(merged), np.arange(store.n_events))

    def test_ties_fall_in_earlier_partition(self):
        # events 6..8 share the boundary timestamp; all belong to train
        ts = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 7.0, 7.0, 9.0]
        store = TemporalGraphStore(np.ones(10, int), np.full(10, 2), ts)
        spec = make_split(store, 0.70, 0.15, inductive_fraction=0.0)
        parts = partition_indices(store, spec)
        assert spec.train_end_ts == 7.0
        assert set(parts["train"]) == set(range(9))

    def test_inductive_nodes_removed_from_training(self):
        rng = np.random.default_rng(23)
        store = random_store(rng, n_events=300)
        spec = make_split(store, seed=5, inductive_fraction=0.25, mode="inductive")
        assert len(spec.unseen_nodes) == math.ceil(0.25 * store.n_nodes)
        parts = partition_indices(store, spec)
        for i in parts["train"]:
            assert int(store.src[i]) not in spec.unseen_nodes
            assert int(store.dst[i]) not in spec.unseen_nodes

    def test_inductive_test_subset(self):
        rng = np.random.default_rng(29)
        store = random_store(rng, n_events=300)
        spec = make_split(store, seed=5, inductive_fraction=0.25)
        ind = inductive_test_indices(store, spec)
        parts = partition_indices(store, spec)
        assert set(ind).issubset(set(parts["test"]))
        for i in ind:
            assert (
                int(store.src[i]) in spec.unseen_nodes
                or int(store.dst[i]) in spec.unseen_nodes
            )
        # complement of the subset touches no unseen node
        for i in set(parts["test"]) - set(ind):
            assert int(store.src[i]) not in spec.unseen_nodes
            assert int(store.dst[i]) not in spec.unseen_nodes

    def test_unseen_sampling_is_seeded(self):
        rng = np.random.default_rng(31)
        store = random_store(rng)
        a = make_split(store, seed=7).unseen_nodes
        b = make_split(store, seed=7).unseen_nodes
        c = make_split(store, seed=8).unseen_nodes
        assert a == b
        assert a != c  # overwhelmingly likely for 30 nodes

    def test_default_inductive_fraction(self):
        rng = np.random.default_rng(37)
        store = random_store(rng)
        spec = make_split(store, seed=0)
        assert len(spec.unseen_nodes) == math.ceil(0.10 * store.n_nodes)

    def test_bad_fractions_rejected(self):
        store = TemporalGraphStore([1], [2], [0.0])
        with pytest.raises(ContractError):
            make_split(store, 0.9, 0.2)

    def test_spec_validates_ordering(self):
        from tfwaveformer.graph import SplitSpec

        with pytest.raises(ContractError):
            SplitSpec(train_end_ts=5.0, val_end_ts=4.0)
