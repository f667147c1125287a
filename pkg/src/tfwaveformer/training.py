"""Training loop: chronological mini-batches, Adam, early stopping.

Each epoch walks the training partition in time order, pairs every batch
of positives with freshly sampled negatives, and minimizes the logistic
loss plus the kernel norm penalty. Validation ranking quality (with a
fixed negative set per run) drives early stopping and best-checkpoint
selection.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .checkpoint import encode_generator, load_arrays, save_arrays
from .errors import ContractError, DataFormatError, DivergenceError
from .features import build_pair_batch
from .gradcheck import parameter_group
from .graph import partition_indices
from .metrics import evaluate_model
from .model import TFWaveFormer
from .optim import Adam
from .sampling import NegativeSampler

TRAIN_LOG_HEADER = ["epoch", "train_loss", "val_ap", "val_auc", "seconds"]
CHECKPOINT_NAME = "model.tfwf"
TRAIN_LOG_NAME = "train_log.csv"

# offset so validation negatives never replay the training sampler stream
_VAL_SEED_OFFSET = 10007


@dataclass
class TrainResult:
    history: list = field(default_factory=list)
    best_val_ap: float = float("nan")
    best_epoch: int = 0
    stopped_early: bool = False
    checkpoint_path: str = ""


def _group_norms(model):
    norms = {}
    for name, p in model.parameters().items():
        g = parameter_group(name)
        norms[g] = norms.get(g, 0.0) + float(np.sum(p.data.astype(np.float64) ** 2))
    return {g: math.sqrt(v) for g, v in norms.items()}


def save_checkpoint(path, model, optimizer, sampler_rng, hyper=None):
    """Bundle parameters, optimizer moments, sampler state and hyperparams.

    The model's own architecture record is always included; ``hyper`` adds
    run settings (sequence length, learning rate, batch size) on top.
    """
    merged = dict(model.hyper_record)
    merged.update(hyper or {})
    arrays = {}
    for name, p in model.parameters().items():
        arrays[f"param.{name}"] = p.data
    for name, arr in optimizer.state_arrays().items():
        arrays[f"optim.{name}"] = arr
    arrays["rng.sampler"] = encode_generator(sampler_rng)
    for key, value in merged.items():
        arrays[f"hyper.{key}"] = np.atleast_1d(np.asarray(value, dtype=np.float32))
    save_arrays(path, arrays)


def load_checkpoint(path):
    """Rebuild the model (and return run hyperparameters) from a file."""
    arrays = load_arrays(path)

    def hyper(key):
        full = f"hyper.{key}"
        if full not in arrays:
            raise DataFormatError(f"{path}: checkpoint lacks hyperparameter {key}")
        return arrays[full]

    kernel_sizes = [int(round(float(x))) for x in hyper("kernel_sizes")]
    model = TFWaveFormer(
        d=int(hyper("d")[0]),
        d_e=int(hyper("d_e")[0]),
        heads=int(hyper("heads")[0]),
        n_layers=int(hyper("n_layers")[0]),
        kernel_sizes=kernel_sizes,
        seed=int(hyper("seed")[0]),
        tau=float(hyper("tau")[0]),
        lam=float(hyper("lam")[0]),
        dropout=float(hyper("dropout")[0]),
        masked_pool=bool(int(hyper("masked_pool")[0])),
        use_temporal=bool(int(hyper("use_temporal")[0])),
        use_frequency=bool(int(hyper("use_frequency")[0])),
        dtype=np.float32,
    )
    for name, p in model.parameters().items():
        key = f"param.{name}"
        if key not in arrays:
            raise DataFormatError(f"{path}: checkpoint lacks parameter {name}")
        stored = arrays[key]
        if stored.shape != p.data.shape:
            raise DataFormatError(
                f"{path}: parameter {name} has shape {stored.shape}, "
                f"expected {p.data.shape}"
            )
        p.data = stored.astype(p.data.dtype, copy=True)
    extras = {
        "length": int(hyper("length")[0]),
        "lr": float(hyper("lr")[0]),
        "batch_size": int(hyper("batch_size")[0]),
        "seed": int(hyper("seed")[0]),
    }
    return model, extras, arrays


def train(
    model,
    store,
    split,
    *,
    epochs=50,
    batch_size=200,
    lr=1e-3,
    length=32,
    strategy="random",
    patience=5,
    seed=42,
    out_dir=None,
    hyper=None,
    log=None,
    chunk_pairs=100,
):
    """Run the training loop; returns history plus best-epoch bookkeeping.

    With ``out_dir`` set, writes ``train_log.csv`` (one row per epoch:
    epoch, mean train loss, validation AP/AUC, wall seconds) and keeps the
    best-validation-AP checkpoint at ``model.tfwf``. Zero epochs leave the
    initial state checkpointed and the log empty. A non-finite loss aborts
    with the per-group parameter norms in the message.

    ``chunk_pairs`` bounds how many scored pairs share one backward graph;
    each optimizer step still covers the whole batch because chunk losses
    are weighted by chunk size and gradients accumulate across calls.
    """
    parts = partition_indices(store, split)
    train_idx = parts["train"]
    if train_idx.size == 0:
        raise ContractError("the training partition is empty")
    if parts["val"].size == 0:
        raise ContractError("the validation partition is empty")

    sampler = NegativeSampler(store, split, strategy, seed=seed)
    optimizer = Adam(model.parameters(), lr=lr)
    hyper = dict(hyper or {})
    hyper.setdefault("length", length)
    hyper.setdefault("lr", lr)
    hyper.setdefault("batch_size", batch_size)

    log_path = None
    ckpt_path = None
    writer = None
    log_fh = None
    if out_dir is not None:
        import os

        os.makedirs(out_dir, exist_ok=True)
        log_path = os.path.join(out_dir, TRAIN_LOG_NAME)
        ckpt_path = os.path.join(out_dir, CHECKPOINT_NAME)
        log_fh = open(log_path, "w", newline="")
        writer = csv.writer(log_fh)
        writer.writerow(TRAIN_LOG_HEADER)
        log_fh.flush()

    result = TrainResult(checkpoint_path=ckpt_path or "")
    if ckpt_path is not None:
        # epoch-zero state, so evaluation works even without any training
        save_checkpoint(ckpt_path, model, optimizer, sampler.rng, hyper)

    best_ap = -math.inf
    epochs_since_best = 0
    try:
        for epoch in range(1, epochs + 1):
            t0 = time.perf_counter()
            losses = []
            for start in range(0, train_idx.size, batch_size):
                idx = train_idx[start : start + batch_size]
                src, dst, t = store.src[idx], store.dst[idx], store.ts[idx]
                neg_src, neg_dst = sampler.sample(src, dst, t)
                all_src = np.concatenate([src, neg_src])
                all_dst = np.concatenate([dst, neg_dst])
                all_t = np.concatenate([t, t])
                labels = np.concatenate([np.ones(len(idx)), np.zeros(len(idx))])
                n_pairs = all_src.size

                optimizer.zero_grad()
                value = 0.0
                for cstart in range(0, n_pairs, chunk_pairs):
                    cstop = min(cstart + chunk_pairs, n_pairs)
                    cbatch = build_pair_batch(
                        store,
                        all_src[cstart:cstop],
                        all_dst[cstart:cstop],
                        all_t[cstart:cstop],
                        length,
                    )
                    closs = model.loss(cbatch, labels[cstart:cstop])
                    closs = closs * ((cstop - cstart) / n_pairs)
                    cvalue = closs.item()
                    if not math.isfinite(cvalue):
                        norms = ", ".join(
                            f"{g}={n:.3e}"
                            for g, n in sorted(_group_norms(model).items())
                        )
                        raise DivergenceError(
                            f"non-finite loss at epoch {epoch}, batch "
                            f"{start // batch_size + 1}; parameter norms: {norms}"
                        )
                    closs.backward()
                    value += cvalue
                optimizer.step()
                losses.append(value)

            val_ap, val_auc = evaluate_model(
                model,
                store,
                split,
                partition="val",
                strategy="random",
                length=length,
                batch_size=batch_size,
                seed=seed + _VAL_SEED_OFFSET,
            )
            seconds = time.perf_counter() - t0
            row = {
                "epoch": epoch,
                "train_loss": float(np.mean(losses)),
                "val_ap": val_ap,
                "val_auc": val_auc,
                "seconds": seconds,
            }
            result.history.append(row)
            if writer is not None:
                writer.writerow(
                    [
                        epoch,
                        f"{row['train_loss']:.6f}",
                        f"{val_ap:.6f}",
                        f"{val_auc:.6f}",
                        f"{seconds:.3f}",
                    ]
                )
                log_fh.flush()
            if log is not None:
                log(
                    f"epoch {epoch:3d}  loss {row['train_loss']:.4f}  "
                    f"val_ap {val_ap:.4f}  val_auc {val_auc:.4f}  "
                    f"({seconds:.1f}s)"
                )

            if val_ap > best_ap:
                best_ap = val_ap
                result.best_val_ap = val_ap
                result.best_epoch = epoch
                epochs_since_best = 0
                if ckpt_path is not None:
                    save_checkpoint(ckpt_path, model, optimizer, sampler.rng, hyper)
            else:
                epochs_since_best += 1
                if epochs_since_best >= patience:
                    result.stopped_early = True
                    if log is not None:
                        log(
                            f"stopping early: no validation AP gain in "
                            f"{patience} epochs (best {best_ap:.4f} at "
                            f"epoch {result.best_epoch})"
                        )
                    break
    finally:
        if log_fh is not None:
            log_fh.close()
    return result
