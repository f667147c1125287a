"""Negative pair sampling for training and ranking evaluation.

Three strategies:

- ``random``: keep the source, draw the destination uniformly from all
  nodes except the true one;
- ``historical``: draw a distinct pair first observed strictly before the
  batch window that is not a positive of the current batch;
- ``inductive``: draw a distinct pair observed only after the training
  cutoff (never during training).

The historical and inductive pools can be empty (early batches, small
stores); those draws fall back to the random strategy. Every sampled
negative differs from its positive pair.
"""

from __future__ import annotations

from bisect import bisect_left

import numpy as np

from .errors import ConfigError

STRATEGIES = ("random", "historical", "inductive")

_MAX_TRIES = 50


class NegativeSampler:
    def __init__(self, store, split, strategy, seed=0):
        if strategy not in STRATEGIES:
            raise ConfigError(
                f"unknown negative sampling strategy {strategy!r}; "
                f"choose from {', '.join(STRATEGIES)}"
            )
        if store.n_nodes < 2:
            raise ConfigError("negative sampling needs at least two nodes")
        self.store = store
        self.strategy = strategy
        self.rng = np.random.default_rng(seed)

        # distinct ordered pairs by first appearance; the first-seen array is
        # non-decreasing because the event log is sorted
        first_seen = {}
        for i in range(store.n_events):
            key = (int(store.src[i]), int(store.dst[i]))
            if key not in first_seen:
                first_seen[key] = float(store.ts[i])
        self._pairs = list(first_seen.keys())
        self._first_ts = np.array([first_seen[p] for p in self._pairs])

        if strategy == "inductive":
            train_pairs = {
                p for p, t0 in first_seen.items() if t0 <= split.train_end_ts
            }
            seen_late = set()
            for i in range(store.n_events):
                if float(store.ts[i]) > split.train_end_ts:
                    seen_late.add((int(store.src[i]), int(store.dst[i])))
            self._eval_pairs = sorted(seen_late - train_pairs)
        else:
            self._eval_pairs = []

    def _random_destination(self, dst):
        """Uniform over all nodes except ``dst`` without rejection."""
        v = int(self.rng.integers(1, self.store.n_nodes))
        if v >= dst:
            v += 1
        return v

    def sample(self, src, dst, times):
        """One negative pair per positive; arrays ``(neg_src, neg_dst)``."""
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        times = np.asarray(times, dtype=np.float64)
        n = len(src)
        neg_src = src.copy()
        neg_dst = np.empty(n, dtype=np.int64)

        positives = set(zip(src.tolist(), dst.tolist()))
        pool = None
        if self.strategy == "historical":
            cutoff = bisect_left(self._first_ts, float(times.min())) if n else 0
            pool = self._pairs[:cutoff]
        elif self.strategy == "inductive":
            pool = self._eval_pairs

        for i in range(n):
            drawn = None
            if pool:
                for _ in range(_MAX_TRIES):
                    cand = pool[int(self.rng.integers(0, len(pool)))]
                    if cand not in positives and cand != (int(src[i]), int(dst[i])):
                        drawn = cand
                        break
            if drawn is None:
                drawn = (int(src[i]), self._random_destination(int(dst[i])))
            neg_src[i], neg_dst[i] = drawn
        return neg_src, neg_dst
