"""Multi-modal feature extraction for neighbor sequences.

Each slot of a node's recent-interaction sequence contributes four
modalities: node features (zeros on featureless datasets), edge features,
a learnable periodic encoding of the time delta, and the pairwise
interaction-frequency counts. Modalities are aligned to a common width,
concatenated and reduced to the model dimension, all slot-locally.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, concat, lecun_uniform
from .errors import ContractError


def nif_counts(ids_a, mask_a, ids_b, mask_b):
    """Interaction-frequency counts for the a-side of a batch of pairs.

    For every valid slot ``j`` of sequence ``a`` with neighbor id ``n_j``,
    column 0 counts occurrences of ``n_j`` among the partner sequence's
    valid neighbors and column 1 counts occurrences within ``a`` itself
    (including slot ``j``). Padded slots yield ``(0, 0)``.
    """
    ids_a = np.asarray(ids_a)
    ids_b = np.asarray(ids_b)
    mask_a = np.asarray(mask_a, dtype=bool)
    mask_b = np.asarray(mask_b, dtype=bool)
    cross = ((ids_a[..., :, None] == ids_b[..., None, :]) & mask_b[..., None, :]).sum(
        axis=-1
    )
    own = ((ids_a[..., :, None] == ids_a[..., None, :]) & mask_a[..., None, :]).sum(
        axis=-1
    )
    out = np.stack([cross, own], axis=-1).astype(np.float32)
    out *= mask_a[..., None]
    return out


def nif_raw(seq, partner):
    """Single-pair counts, ``(L, 2)``, for :class:`~.graph.NeighborSequence`s."""
    return nif_counts(
        seq.node_ids[None], seq.mask[None], partner.node_ids[None], partner.mask[None]
    )[0]


@dataclass
class SequenceBatch:
    """Dense model input for ``N`` neighbor sequences."""

    deltas: np.ndarray  # (N, L) float64, query time minus event time
    edge_feats: np.ndarray  # (N, L, d_e) float32
    nif: np.ndarray  # (N, L, 2) float32
    mask: np.ndarray  # (N, L) bool

    @property
    def n(self):
        return self.deltas.shape[0]

    @property
    def length(self):
        return self.deltas.shape[1]


def _stack_sequences(store, nodes, times, length):
    n = len(nodes)
    ids = np.zeros((n, length), dtype=np.int64)
    deltas = np.zeros((n, length), dtype=np.float64)
    feats = np.zeros((n, length, store.d_e), dtype=np.float32)
    mask = np.zeros((n, length), dtype=bool)
    for i, (node, t) in enumerate(zip(nodes, times)):
        seq = store.recent_neighbors(int(node), float(t), length)
        ids[i] = seq.node_ids
        deltas[i] = seq.deltas
        feats[i] = seq.edge_feats
        mask[i] = seq.mask
    return ids, deltas, feats, mask


def build_pair_batch(store, src, dst, times, length):
    """Sequences plus pairwise NIF counts for pairs ``(src_i, dst_i, t_i)``.

    Returns one :class:`SequenceBatch` of ``2n`` rows: sources first, then
    destinations, so row ``i`` pairs with row ``n + i``.
    """
    src = np.asarray(src)
    dst = np.asarray(dst)
    times = np.asarray(times)
    if not (len(src) == len(dst) == len(times)):
        raise ContractError("src, dst and times must have equal length")
    ids_u, del_u, ft_u, mk_u = _stack_sequences(store, src, times, length)
    ids_v, del_v, ft_v, mk_v = _stack_sequences(store, dst, times, length)
    nif_u = nif_counts(ids_u, mk_u, ids_v, mk_v)
    nif_v = nif_counts(ids_v, mk_v, ids_u, mk_u)
    return SequenceBatch(
        deltas=np.concatenate([del_u, del_v], axis=0),
        edge_feats=np.concatenate([ft_u, ft_v], axis=0),
        nif=np.concatenate([nif_u, nif_v], axis=0),
        mask=np.concatenate([mk_u, mk_v], axis=0),
    )


class FeatureExtractor:
    """Aligns and fuses the four slot modalities into ``(N, L, d)`` inputs."""

    def __init__(self, d, d_e, rng, d_a=None, dtype=np.float32):
        if d % 2 != 0:
            raise ContractError(f"model width d must be even, got {d}")
        self.d = d
        self.d_e = d_e
        self.d_a = d // 2 if d_a is None else d_a
        # the three derived modality widths default to the alignment width
        self.d_t = self.d_a
        self.d_f = self.d_a
        self.d_n = self.d_a
        self.dtype = dtype

        def tensor(arr):
            return Tensor(arr.astype(dtype), requires_grad=True)

        k = np.arange(self.d_t, dtype=np.float64)
        self.omega = tensor(1.0 / 10.0 ** (2.0 * k / self.d_t))
        self.phi = tensor(np.zeros(self.d_t))

        self.nif_w1 = tensor(lecun_uniform(rng, (2, self.d_f), 2, np.float64))
        self.nif_b1 = tensor(np.zeros(self.d_f))
        self.nif_w2 = tensor(lecun_uniform(rng, (self.d_f, self.d_f), self.d_f, np.float64))
        self.nif_b2 = tensor(np.zeros(self.d_f))

        def align(fan_in):
            w = tensor(lecun_uniform(rng, (fan_in, self.d_a), fan_in, np.float64))
            b = tensor(np.zeros(self.d_a))
            return w, b

        self.node_w, self.node_b = align(self.d_n)
        self.edge_w, self.edge_b = align(d_e)
        self.time_w, self.time_b = align(self.d_t)
        self.if_w, self.if_b = align(self.d_f)

        self.reduce_w = tensor(lecun_uniform(rng, (4 * self.d_a, d), 4 * self.d_a, np.float64))
        self.reduce_b = tensor(np.zeros(d))

    def parameters(self):
        return {
            "time.omega": self.omega,
            "time.phi": self.phi,
            "nif.w1": self.nif_w1,
            "nif.b1": self.nif_b1,
            "nif.w2": self.nif_w2,
            "nif.b2": self.nif_b2,
            "align_node.w": self.node_w,
            "align_node.b": self.node_b,
            "align_edge.w": self.edge_w,
            "align_edge.b": self.edge_b,
            "align_time.w": self.time_w,
            "align_time.b": self.time_b,
            "align_if.w": self.if_w,
            "align_if.b": self.if_b,
            "reduce.w": self.reduce_w,
            "reduce.b": self.reduce_b,
        }

    def encode_time(self, deltas):
        """``cos(dt * omega + phi)``, elementwise over ``(N, L)`` deltas."""
        dt = Tensor(np.asarray(deltas, dtype=self.dtype)[..., None])
        return (dt * self.omega + self.phi).cos()

    def encode_nif(self, nif):
        h = Tensor(np.asarray(nif, dtype=self.dtype))
        h = (h @ self.nif_w1 + self.nif_b1).gelu()
        return h @ self.nif_w2 + self.nif_b2

    def fuse(self, batch, node_feats=None):
        """Slot-local fusion of all modalities into ``(N, L, d)``."""
        n, length = batch.deltas.shape
        if node_feats is None:
            node_feats = np.zeros((n, length, self.d_n), dtype=self.dtype)
        parts = [
            Tensor(np.asarray(node_feats, dtype=self.dtype)) @ self.node_w + self.node_b,
            Tensor(batch.edge_feats.astype(self.dtype)) @ self.edge_w + self.edge_b,
            self.encode_time(batch.deltas) @ self.time_w + self.time_b,
            self.encode_nif(batch.nif) @ self.if_w + self.if_b,
        ]
        return concat(parts, axis=-1) @ self.reduce_w + self.reduce_b
