"""Synthetic bipartite interaction streams with planted periodicities.

Nodes split into two halves matched one-to-one. Each matched pair fires at
a fixed period (alternating between the short and long period), with a
deterministic per-pair phase so pairs do not all collide on the same
instants. A ``noise_rate`` fraction of the requested events is drawn
uniformly over random cross-half pairs and times.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .graph import TemporalGraphStore


@dataclass
class SyntheticSpec:
    n_nodes: int = 50
    n_events: int = 2000
    period_short: float = 5.0
    period_long: float = 40.0
    noise_rate: float = 0.2
    seed: int = 42
    horizon: float = 0.0  # 0 derives the horizon from the event budget

    def __post_init__(self):
        if self.n_nodes < 2:
            raise ParameterError(f"need at least 2 nodes, got {self.n_nodes}")
        if self.n_events < 1:
            raise ParameterError(f"need at least 1 event, got {self.n_events}")
        if self.period_short <= 0 or self.period_long <= 0:
            raise ParameterError("periods must be positive")
        if not 0.0 <= self.noise_rate < 1.0:
            raise ParameterError(f"noise rate must be in [0, 1), got {self.noise_rate}")
        if self.horizon < 0:
            raise ParameterError(f"horizon must be >= 0, got {self.horizon}")


@dataclass
class SyntheticData:
    src: np.ndarray
    dst: np.ndarray
    ts: np.ndarray
    pairs: list  # (left node, right node, period) per planted pair
    horizon: float


def generate(spec):
    """Deterministic event stream for ``spec``; raw ids are ``0..n-1``."""
    half = spec.n_nodes // 2
    periods = [
        spec.period_short if i % 2 == 0 else spec.period_long for i in range(half)
    ]
    pairs = [(i, half + i, periods[i]) for i in range(half)]

    if spec.horizon > 0:
        horizon = float(spec.horizon)
    else:
        planted_target = max(1, round(spec.n_events * (1.0 - spec.noise_rate)))
        rate = sum(1.0 / p for p in periods)
        horizon = planted_target / rate

    src, dst, ts = [], [], []
    for i, (a, b, period) in enumerate(pairs):
        phase = (i / max(len(pairs), 1)) * period
        k = 1
        while phase + k * period <= horizon:
            src.append(a)
            dst.append(b)
            ts.append(phase + k * period)
            k += 1

    rng = np.random.default_rng(spec.seed)
    # A noise rate of zero means a clean periodic signal, even when flooring
    # in the planted schedule leaves the event budget short.
    n_noise = max(0, spec.n_events - len(ts)) if spec.noise_rate > 0 else 0
    if n_noise and half >= 1:
        noise_src = rng.integers(0, half, size=n_noise)
        noise_dst = rng.integers(half, spec.n_nodes, size=n_noise)
        noise_ts = rng.uniform(0.0, horizon, size=n_noise)
        src.extend(int(x) for x in noise_src)
        dst.extend(int(x) for x in noise_dst)
        ts.extend(float(x) for x in noise_ts)

    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    ts = np.asarray(ts, dtype=np.float64)
    order = np.argsort(ts, kind="stable")
    return SyntheticData(src[order], dst[order], ts[order], pairs, horizon)


def to_store(data):
    return TemporalGraphStore(data.src, data.dst, data.ts)


def write_csv(data, path):
    """Write the stream as an ingestible ``src,dst,ts`` file."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["src", "dst", "ts"])
        for u, v, t in zip(data.src, data.dst, data.ts):
            writer.writerow([int(u), int(v), repr(float(t))])


def interval_histogram(data, pair_index, bins):
    """Histogram of inter-event gaps for one planted pair (oracle hook)."""
    a, b, _ = data.pairs[pair_index]
    sel = (data.src == a) & (data.dst == b)
    times = np.sort(data.ts[sel])
    if times.size < 2:
        return np.zeros(len(bins) - 1, dtype=np.int64)
    gaps = np.diff(times)
    hist, _ = np.histogram(gaps, bins=bins)
    return hist
