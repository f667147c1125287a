"""Ranking metrics and the chronological link-prediction evaluation."""

from __future__ import annotations

import csv

import numpy as np
from scipy.stats import rankdata

from .autodiff import no_grad
from .errors import ContractError
from .features import build_pair_batch
from .graph import inductive_test_indices, partition_indices
from .sampling import NegativeSampler


def _check_binary(labels, scores):
    labels = np.asarray(labels, dtype=np.float64)
    scores = np.asarray(scores, dtype=np.float64)
    if labels.shape != scores.shape or labels.ndim != 1:
        raise ContractError(
            f"labels {labels.shape} and scores {scores.shape} must be equal 1-D"
        )
    if labels.size == 0:
        raise ContractError("metrics over an empty set are undefined")
    if not np.all((labels == 0) | (labels == 1)):
        raise ContractError("labels must be 0 or 1")
    pos = int(labels.sum())
    if pos == 0 or pos == labels.size:
        raise ContractError(
            f"metrics need both classes, got {pos} positives of {labels.size}"
        )
    return labels, scores, pos


def average_precision(labels, scores):
    """Mean precision at the rank of each positive, descending stable order.

    Ties are broken by input position (stable sort), so equal scores keep
    their original relative order.
    """
    labels, scores, pos = _check_binary(labels, scores)
    order = np.argsort(-scores, kind="stable")
    hits = labels[order]
    cum = np.cumsum(hits)
    precision_at = cum / np.arange(1, labels.size + 1)
    return float(precision_at[hits == 1].mean())


def roc_auc(labels, scores):
    """Rank-form AUC; tied positive/negative pairs earn half credit."""
    labels, scores, pos = _check_binary(labels, scores)
    neg = labels.size - pos
    ranks = rankdata(scores, method="average")
    u = ranks[labels == 1].sum() - pos * (pos + 1) / 2.0
    return float(u / (pos * neg))


def evaluate_model(
    model,
    store,
    split,
    partition="test",
    setting="transductive",
    strategy="random",
    length=32,
    batch_size=200,
    seed=0,
):
    """Chronological ranking evaluation with one negative per positive.

    Walks the chosen partition in time order, pairs every positive edge
    with a sampled negative at the same timestamp, scores both and returns
    ``(ap, auc)`` over the pooled set. The inductive setting restricts the
    positives to test edges touching a held-out node.
    """
    if setting not in ("transductive", "inductive"):
        raise ContractError(f"unknown evaluation setting {setting!r}")
    if setting == "inductive":
        if partition != "test":
            raise ContractError("the inductive setting evaluates the test partition")
        indices = inductive_test_indices(store, split)
    else:
        indices = partition_indices(store, split)[partition]
    if indices.size == 0:
        raise ContractError(
            f"no events to evaluate (partition={partition}, setting={setting})"
        )

    sampler = NegativeSampler(store, split, strategy, seed=seed)
    all_scores = []
    all_labels = []
    for start in range(0, indices.size, batch_size):
        idx = indices[start : start + batch_size]
        src, dst, t = store.src[idx], store.dst[idx], store.ts[idx]
        neg_src, neg_dst = sampler.sample(src, dst, t)
        batch = build_pair_batch(
            store,
            np.concatenate([src, neg_src]),
            np.concatenate([dst, neg_dst]),
            np.concatenate([t, t]),
            length,
        )
        with no_grad():
            scores = model.score_pairs(batch).data.astype(np.float64)
        all_scores.append(scores)
        all_labels.append(
            np.concatenate([np.ones(len(idx)), np.zeros(len(idx))])
        )

    scores = np.concatenate(all_scores)
    labels = np.concatenate(all_labels)
    return average_precision(labels, scores), roc_auc(labels, scores)


METRIC_CSV_HEADER = ["dataset", "setting", "strategy", "ap", "auc", "seed"]


def write_metric_rows(path, rows, preamble=None):
    """Write evaluation rows (dicts with the header's keys) as CSV.

    ``preamble`` lines, when given, are written first as ``#`` comments so a
    result file carries the settings that produced it.
    """
    with open(path, "w", newline="") as fh:
        for line in preamble or ():
            fh.write(f"# {line}\n")
        writer = csv.DictWriter(fh, fieldnames=METRIC_CSV_HEADER)
        writer.writeheader()
        for row in rows:
            out = dict(row)
            out["ap"] = f"{float(row['ap']):.6f}"
            out["auc"] = f"{float(row['auc']):.6f}"
            writer.writerow(out)
