"""Tests for multi-modal feature extraction and NIF counting."""

import numpy as np
import pytest
from helpers import assert_param_grads_match

from tfwaveformer.features import (
    FeatureExtractor,
    SequenceBatch,
    build_pair_batch,
    nif_counts,
    nif_raw,
)
from tfwaveformer.graph import NeighborSequence, TemporalGraphStore


def make_seq(ids, mask, t=10.0):
    ids = np.asarray(ids, dtype=np.int64)
    mask = np.asarray(mask, dtype=bool)
    length = len(ids)
    ts = np.where(mask, np.linspace(1.0, 9.0, length), t)
    return NeighborSequence(
        node_ids=ids,
        ts=ts,
        edge_feats=np.zeros((length, 0), dtype=np.float32),
        mask=mask,
        query_time=t,
    )


class TestNifCounts:
    def test_own_count_worked_example(self):
        """A sequence [a, a, b] counts itself as (2, 2, 1) in column 1."""
        v = make_seq([5, 5, 7], [True, True, True])
        u = make_seq([0, 0, 0], [False, False, False])
        out = nif_raw(v, u)
        np.testing.assert_array_equal(out[:, 1], [2.0, 2.0, 1.0])
        np.testing.assert_array_equal(out[:, 0], [0.0, 0.0, 0.0])

    def test_cross_counts(self):
        v = make_seq([5, 7, 9], [True, True, True])
        u = make_seq([7, 7, 5], [True, True, True])
        out = nif_raw(v, u)
        np.testing.assert_array_equal(out[:, 0], [1.0, 2.0, 0.0])

    def test_padded_slots_are_zero(self):
        v = make_seq([0, 5, 5], [False, True, True])
        u = make_seq([0, 0, 5], [False, False, True])
        out = nif_raw(v, u)
        np.testing.assert_array_equal(out[0], [0.0, 0.0])
        # partner pads (id 0) must not match this side's pads either
        np.testing.assert_array_equal(out[1:, 0], [1.0, 1.0])
        np.testing.assert_array_equal(out[1:, 1], [2.0, 2.0])

    def test_matches_nested_loop_oracle(self):
        rng = np.random.default_rng(13)
        for _ in range(25):
            n, length = 4, 6
            ids_a = rng.integers(1, 5, size=(n, length))
            ids_b = rng.integers(1, 5, size=(n, length))
            mask_a = rng.random((n, length)) < 0.7
            mask_b = rng.random((n, length)) < 0.7
            got = nif_counts(ids_a, mask_a, ids_b, mask_b)

            want = np.zeros((n, length, 2))
            for i in range(n):
                for j in range(length):
                    if not mask_a[i, j]:
                        continue
                    tgt = ids_a[i, j]
                    want[i, j, 0] = sum(
                        1
                        for k in range(length)
                        if mask_b[i, k] and ids_b[i, k] == tgt
                    )
                    want[i, j, 1] = sum(
                        1
                        for k in range(length)
                        if mask_a[i, k] and ids_a[i, k] == tgt
                    )
            np.testing.assert_array_equal(got, want)


class TestTimeEncoder:
    def test_initial_frequencies(self):
        rng = np.random.default_rng(0)
        fx = FeatureExtractor(d=8, d_e=0, rng=rng, dtype=np.float64)
        k = np.arange(fx.d_t)
        np.testing.assert_allclose(fx.omega.data, 1.0 / 10.0 ** (2.0 * k / fx.d_t))
        np.testing.assert_array_equal(fx.phi.data, 0.0)

    def test_output_bounded(self):
        rng = np.random.default_rng(1)
        fx = FeatureExtractor(d=8, d_e=0, rng=rng, dtype=np.float64)
        deltas = rng.uniform(0, 1e6, size=(3, 5))
        enc = fx.encode_time(deltas).data
        assert np.all(enc <= 1.0) and np.all(enc >= -1.0)

    def test_zero_delta_encodes_to_one(self):
        rng = np.random.default_rng(2)
        fx = FeatureExtractor(d=8, d_e=0, rng=rng, dtype=np.float64)
        enc = fx.encode_time(np.zeros((1, 4))).data
        np.testing.assert_allclose(enc, 1.0)


def tiny_batch(rng, n=2, length=3, d_e=2):
    return SequenceBatch(
        deltas=rng.uniform(0, 5, size=(n, length)),
        edge_feats=rng.standard_normal((n, length, d_e)).astype(np.float32),
        nif=rng.integers(0, 4, size=(n, length, 2)).astype(np.float32),
        mask=np.ones((n, length), dtype=bool),
    )


class TestFuse:
    def test_output_shape_and_defaults(self):
        rng = np.random.default_rng(3)
        fx = FeatureExtractor(d=8, d_e=2, rng=rng)
        assert fx.d_a == 4 and fx.d_t == 4 and fx.d_f == 4 and fx.d_n == 4
        out = fx.fuse(tiny_batch(rng))
        assert out.shape == (2, 3, 8)
        assert out.data.dtype == np.float32

    def test_zero_width_edge_features(self):
        rng = np.random.default_rng(4)
        fx = FeatureExtractor(d=8, d_e=0, rng=rng)
        batch = tiny_batch(rng, d_e=0)
        out = fx.fuse(batch)
        assert out.shape == (2, 3, 8)
        assert np.all(np.isfinite(out.data))

    def test_odd_width_rejected(self):
        with pytest.raises(Exception):
            FeatureExtractor(d=7, d_e=0, rng=np.random.default_rng(0))

    def test_fusion_is_slot_local(self):
        """Perturbing one slot's inputs only moves that slot's output row."""
        rng = np.random.default_rng(5)
        fx = FeatureExtractor(d=8, d_e=2, rng=rng, dtype=np.float64)
        batch = tiny_batch(rng)
        base = fx.fuse(batch).data.copy()
        batch.edge_feats[1, 2] += 1.0
        batch.nif[1, 2] += 1.0
        batch.deltas[1, 2] += 0.5
        bumped = fx.fuse(batch).data
        changed = np.any(np.abs(bumped - base) > 1e-12, axis=-1)
        assert changed[1, 2]
        changed[1, 2] = False
        assert not changed.any()

    def test_gradients_reach_every_parameter(self):
        rng = np.random.default_rng(6)
        fx = FeatureExtractor(d=8, d_e=2, rng=rng, dtype=np.float64)
        batch = tiny_batch(rng)
        w = rng.standard_normal((2, 3, 8))

        def loss():
            return (fx.fuse(batch) * w).sum()

        assert_param_grads_match(loss, fx.parameters())


class TestPairBatch:
    def test_assembly_against_store(self):
        rng = np.random.default_rng(7)
        src = rng.integers(0, 10, size=50)
        dst = rng.integers(10, 20, size=50)
        ts = np.sort(rng.uniform(0, 100, size=50))
        feats = rng.standard_normal((50, 2)).astype(np.float32)
        store = TemporalGraphStore(src, dst, ts, feats)

        pairs_u = [1, 2, 3]
        pairs_v = [11, 12, 13]
        times = [50.0, 80.0, 99.0]
        batch = build_pair_batch(store, pairs_u, pairs_v, times, length=5)
        assert batch.n == 6
        assert batch.length == 5
        # first three rows are the source sequences
        for i, (node, t) in enumerate(zip(pairs_u, times)):
            seq = store.recent_neighbors(node, t, 5)
            np.testing.assert_array_equal(batch.mask[i], seq.mask)
            np.testing.assert_allclose(batch.deltas[i], seq.deltas)
        for i, (node, t) in enumerate(zip(pairs_v, times)):
            seq = store.recent_neighbors(node, t, 5)
            np.testing.assert_array_equal(batch.mask[3 + i], seq.mask)

    def test_nif_sides_are_mutual(self):
        rng = np.random.default_rng(11)
        src = rng.integers(0, 6, size=80)
        dst = rng.integers(6, 12, size=80)
        ts = np.sort(rng.uniform(0, 100, size=80))
        store = TemporalGraphStore(src, dst, ts)
        batch = build_pair_batch(store, [1, 2], [7, 8], [90.0, 95.0], length=6)
        n = 2
        for i in range(n):
            u_seq = store.recent_neighbors(
                [1, 2][i], [90.0, 95.0][i], 6
            )
            v_seq = store.recent_neighbors([7, 8][i], [90.0, 95.0][i], 6)
            np.testing.assert_array_equal(batch.nif[i], nif_raw(u_seq, v_seq))
            np.testing.assert_array_equal(batch.nif[n + i], nif_raw(v_seq, u_seq))
