"""Temporal graph storage, neighbor lookup and chronological splitting.

Events are interactions ``(src, dst, ts, edge_feat)`` sorted by timestamp.
Node ids from the input are densified to ``1..V`` on ingest; dense id 0 is
reserved as the padding sentinel in neighbor sequences.
"""

from __future__ import annotations

import csv
import math
from bisect import bisect_left
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ContractError,
    DataFormatError,
    IngestError,
    NodeLookupError,
)


@dataclass(frozen=True)
class TemporalEvent:
    """One timestamped interaction between two nodes (dense ids)."""

    src: int
    dst: int
    ts: float
    edge_feat: np.ndarray
    idx: int


@dataclass
class NeighborSequence:
    """The ``L`` most recent interactions of one node before a query time.

    Valid entries sit right-aligned in increasing timestamp order, all
    strictly earlier than ``query_time``. Padding slots (on the left) carry
    node id 0, zero features, ``ts == query_time`` so their time delta is
    zero, and ``mask`` False.
    """

    node_ids: np.ndarray  # (L,) int64, other endpoint of each interaction
    ts: np.ndarray  # (L,) float64
    edge_feats: np.ndarray  # (L, d_e) float32
    mask: np.ndarray  # (L,) bool
    query_time: float

    @property
    def deltas(self):
        return self.query_time - self.ts


@dataclass(frozen=True)
class SplitSpec:
    """Chronological split boundaries plus the inductively held-out nodes."""

    train_end_ts: float
    val_end_ts: float
    unseen_nodes: frozenset = field(default_factory=frozenset)
    mode: str = "transductive"

    def __post_init__(self):
        if self.train_end_ts > self.val_end_ts:
            raise ContractError(
                f"train_end_ts {self.train_end_ts} exceeds val_end_ts {self.val_end_ts}"
            )
        if self.mode not in ("transductive", "inductive"):
            raise ContractError(f"unknown split mode {self.mode!r}")


class TemporalGraphStore:
    """Immutable event log with per-node time-sorted adjacency indexes."""

    def __init__(self, src, dst, ts, edge_feats=None, labels=None, id_map=None):
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        ts = np.asarray(ts, dtype=np.float64)
        n = src.shape[0]
        if dst.shape[0] != n or ts.shape[0] != n:
            raise DataFormatError("src, dst and ts must have equal length")
        if n and np.any(np.diff(ts) < 0):
            bad = int(np.argmax(np.diff(ts) < 0)) + 1
            raise IngestError(f"timestamps decrease at event index {bad}")

        if edge_feats is None:
            edge_feats = np.zeros((n, 0), dtype=np.float32)
        edge_feats = np.asarray(edge_feats, dtype=np.float32)
        if edge_feats.shape[0] != n:
            raise DataFormatError("edge feature rows must match event count")

        if id_map is None:
            id_map = {}
            dense_src = np.empty(n, dtype=np.int64)
            dense_dst = np.empty(n, dtype=np.int64)
            for i in range(n):
                for raw, out in ((src[i], dense_src), (dst[i], dense_dst)):
                    key = int(raw)
                    if key not in id_map:
                        id_map[key] = len(id_map) + 1
                    out[i] = id_map[key]
            src, dst = dense_src, dense_dst
        self.id_map = dict(id_map)

        self.src = src
        self.dst = dst
        self.ts = ts
        self.edge_feats = edge_feats
        self.labels = None if labels is None else np.asarray(labels, dtype=np.float32)
        self.n_events = n
        self.n_nodes = len(self.id_map)
        self.d_e = edge_feats.shape[1]

        # per-node adjacency: timestamps, event indexes and the opposite
        # endpoint, each already sorted because the event log is
        nbr_ts = [[] for _ in range(self.n_nodes + 1)]
        nbr_ev = [[] for _ in range(self.n_nodes + 1)]
        nbr_id = [[] for _ in range(self.n_nodes + 1)]
        for i in range(n):
            u, v = int(self.src[i]), int(self.dst[i])
            t = float(ts[i])
            nbr_ts[u].append(t)
            nbr_ev[u].append(i)
            nbr_id[u].append(v)
            if v != u:
                nbr_ts[v].append(t)
                nbr_ev[v].append(i)
                nbr_id[v].append(u)
        self._nbr_ts = [np.asarray(a, dtype=np.float64) for a in nbr_ts]
        self._nbr_ev = [np.asarray(a, dtype=np.int64) for a in nbr_ev]
        self._nbr_id = [np.asarray(a, dtype=np.int64) for a in nbr_id]

    # -- basic access -------------------------------------------------------

    def event(self, idx):
        return TemporalEvent(
            src=int(self.src[idx]),
            dst=int(self.dst[idx]),
            ts=float(self.ts[idx]),
            edge_feat=self.edge_feats[idx],
            idx=int(idx),
        )

    def node_ids(self):
        """All dense node ids, ``1..V``."""
        return np.arange(1, self.n_nodes + 1, dtype=np.int64)

    def recent_neighbors(self, node, t, length):
        """Left-padded sequence of the ``length`` latest events of ``node``
        strictly before time ``t``."""
        if not 1 <= node <= self.n_nodes:
            raise NodeLookupError(f"node {node} is not in the store (1..{self.n_nodes})")
        ts_arr = self._nbr_ts[node]
        pos = bisect_left(ts_arr, t)
        take = min(length, pos)

        node_ids = np.zeros(length, dtype=np.int64)
        out_ts = np.full(length, float(t), dtype=np.float64)
        feats = np.zeros((length, self.d_e), dtype=np.float32)
        mask = np.zeros(length, dtype=bool)
        if take:
            sel = slice(pos - take, pos)
            node_ids[length - take :] = self._nbr_id[node][sel]
            out_ts[length - take :] = ts_arr[sel]
            feats[length - take :] = self.edge_feats[self._nbr_ev[node][sel]]
            mask[length - take :] = True
        return NeighborSequence(node_ids, out_ts, feats, mask, float(t))

    # -- serialization ------------------------------------------------------

    def to_csv(self, path):
        """Write the event log back out with the original (raw) node ids."""
        inverse = {dense: raw for raw, dense in self.id_map.items()}
        header = ["src", "dst", "ts"]
        if self.labels is not None:
            header.append("label")
        header += [f"feat_{j}" for j in range(self.d_e)]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i in range(self.n_events):
                row = [
                    inverse[int(self.src[i])],
                    inverse[int(self.dst[i])],
                    repr(float(self.ts[i])),
                ]
                if self.labels is not None:
                    row.append(repr(float(self.labels[i])))
                row += [repr(float(x)) for x in self.edge_feats[i]]
                writer.writerow(row)


def ingest_csv(path):
    """Load a ``src,dst,ts[,label][,feat_0..]`` file into a store.

    Node ids are densified in order of first appearance. Rows must be sorted
    by non-decreasing timestamp; violations raise :class:`IngestError` with
    the 1-based file line (the header is line 1). Rows whose width differs
    from the header raise :class:`DataFormatError`.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if header[:3] != ["src", "dst", "ts"]:
            raise DataFormatError(
                f"{path}: header must begin with src,dst,ts, got {header[:3]}"
            )
        rest = header[3:]
        has_label = bool(rest) and rest[0] == "label"
        feat_names = rest[1:] if has_label else rest
        for j, name in enumerate(feat_names):
            if name != f"feat_{j}":
                raise DataFormatError(
                    f"{path}: expected feature column feat_{j}, got {name!r}"
                )
        width = len(header)
        d_e = len(feat_names)

        src, dst, ts = [], [], []
        labels = [] if has_label else None
        feats = []
        prev_ts = -math.inf
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise DataFormatError(
                    f"{path}: line {line_no} has {len(row)} fields, expected {width}"
                )
            try:
                u = int(row[0])
                v = int(row[1])
                t = float(row[2])
                rest_vals = [float(x) for x in row[3:]]
            except ValueError as exc:
                raise DataFormatError(f"{path}: line {line_no}: {exc}") from None
            if t < prev_ts:
                raise IngestError(
                    f"{path}: line {line_no}: timestamp {t} is earlier than "
                    f"the previous event ({prev_ts})"
                )
            prev_ts = t
            src.append(u)
            dst.append(v)
            ts.append(t)
            if has_label:
                labels.append(rest_vals[0])
                feats.append(rest_vals[1:])
            else:
                feats.append(rest_vals)

    feat_arr = np.asarray(feats, dtype=np.float32).reshape(len(src), d_e)
    return TemporalGraphStore(src, dst, ts, feat_arr, labels=labels)


def make_split(
    store,
    train_frac=0.70,
    val_frac=0.15,
    inductive_fraction=0.10,
    seed=0,
    mode="transductive",
):
    """Chronological train/val/test boundaries plus held-out node sampling.

    The training window ends at the timestamp of event ``ceil(train_frac*N)``
    (1-based) and validation at event ``ceil((train_frac+val_frac)*N)``.
    Events whose timestamp ties a boundary fall in the earlier partition.
    ``ceil(inductive_fraction * V)`` nodes are drawn with a seeded generator;
    their training-period edges are dropped from the training set and test
    edges touching them form the inductive evaluation subset.
    """
    if store.n_events == 0:
        raise ContractError("cannot split an empty store")
    if not (0 < train_frac < 1 and 0 < val_frac < 1 and train_frac + val_frac < 1):
        raise ContractError(
            f"invalid split fractions train={train_frac} val={val_frac}"
        )
    if not 0 <= inductive_fraction <= 1:
        raise ContractError(f"inductive_fraction must be in [0,1], got {inductive_fraction}")

    n = store.n_events
    i_train = math.ceil(train_frac * n) - 1
    i_val = math.ceil((train_frac + val_frac) * n) - 1
    train_end = float(store.ts[i_train])
    val_end = float(store.ts[i_val])

    unseen = frozenset()
    if inductive_fraction > 0:
        rng = np.random.default_rng(seed)
        k = math.ceil(inductive_fraction * store.n_nodes)
        picked = rng.choice(store.node_ids(), size=k, replace=False)
        unseen = frozenset(int(x) for x in picked)

    return SplitSpec(train_end, val_end, unseen_nodes=unseen, mode=mode)


def partition_indices(store, spec):
    """Event index arrays for the three partitions.

    Training excludes events touching an inductively held-out node; every
    event lands in exactly one of train/val/test before that filter.
    """
    ts = store.ts
    train = np.flatnonzero(ts <= spec.train_end_ts)
    val = np.flatnonzero((ts > spec.train_end_ts) & (ts <= spec.val_end_ts))
    test = np.flatnonzero(ts > spec.val_end_ts)
    if spec.unseen_nodes:
        unseen = np.asarray(sorted(spec.unseen_nodes), dtype=np.int64)
        touches = np.isin(store.src[train], unseen) | np.isin(store.dst[train], unseen)
        train = train[~touches]
    return {"train": train, "val": val, "test": test}


def inductive_test_indices(store, spec):
    """Test events with at least one endpoint among the held-out nodes."""
    parts = partition_indices(store, spec)
    test = parts["test"]
    if not spec.unseen_nodes:
        return test[:0]
    unseen = np.asarray(sorted(spec.unseen_nodes), dtype=np.int64)
    touches = np.isin(store.src[test], unseen) | np.isin(store.dst[test], unseen)
    return test[touches]
