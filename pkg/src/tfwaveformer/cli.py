"""Command line front end: synth, train, evaluate, gradcheck, sweep-m.

The TFWF_THREADS environment variable, when set, caps the BLAS thread
pools. It must take effect before numpy loads, which is why this module
touches os.environ before any numeric import.
"""

from __future__ import annotations

import os

_THREAD_CAP = os.environ.get("TFWF_THREADS")
if _THREAD_CAP:
    for _var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
        "VECLIB_MAXIMUM_THREADS",
    ):
        os.environ.setdefault(_var, _THREAD_CAP)

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from .config import config_lines, load_config, model_kwargs
from .errors import ConfigError, DivergenceError, TfwError
from .features import build_pair_batch
from .gradcheck import PASS_THRESHOLD, check_model_gradients, report_lines
from .graph import ingest_csv, make_split, partition_indices
from .metrics import evaluate_model, write_metric_rows
from .model import TFWaveFormer
from .reporting import plot_scale_sweep, plot_training_curves
from .sampling import NegativeSampler
from .synthetic import SyntheticSpec, generate, to_store, write_csv
from .training import CHECKPOINT_NAME, TRAIN_LOG_NAME, load_checkpoint, train
from .wavelet import MAX_SCALES, default_kernel_sizes

METRICS_NAME = "metrics.csv"
SWEEP_CSV_NAME = "sweep_m.csv"


def _overrides_from(args):
    keys = (
        "seed",
        "setting",
        "strategy",
        "epochs",
        "m",
        "disable_temporal",
        "disable_frequency",
    )
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


def _config_from(args):
    return load_config(getattr(args, "config", None), _overrides_from(args))


def _dataset_name(path):
    base = os.path.basename(path)
    return os.path.splitext(base)[0] or base


def _echo_config(cfg):
    print("effective configuration:")
    for line in config_lines(cfg):
        print(f"  {line}")


def _train_and_test(cfg, store, split, out_dir, quiet=False):
    """Train in out_dir, then score the best checkpoint on the test split."""
    model = TFWaveFormer(**model_kwargs(cfg, store.d_e))
    log = None if quiet else print
    result = train(
        model,
        store,
        split,
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        lr=cfg.lr,
        length=cfg.length,
        strategy=cfg.strategy,
        patience=cfg.patience,
        seed=cfg.seed,
        out_dir=out_dir,
        log=log,
    )
    best_model, _, _ = load_checkpoint(result.checkpoint_path)
    ap, auc = evaluate_model(
        best_model,
        store,
        split,
        partition="test",
        setting=cfg.setting,
        strategy=cfg.strategy,
        length=cfg.length,
        batch_size=cfg.batch_size,
        seed=cfg.seed,
    )
    return ap, auc, result


def cmd_synth(args):
    spec = SyntheticSpec(
        n_nodes=args.nodes,
        n_events=args.events,
        period_short=args.period_short,
        period_long=args.period_long,
        noise_rate=args.noise,
        seed=args.seed if args.seed is not None else 42,
        horizon=args.horizon,
    )
    data = generate(spec)
    write_csv(data, args.out)
    print(
        f"wrote {len(data.ts)} events over {spec.n_nodes} nodes "
        f"(periods {spec.period_short}/{spec.period_long}, "
        f"noise {spec.noise_rate}) to {args.out}"
    )
    return 0


def cmd_train(args):
    cfg = _config_from(args)
    _echo_config(cfg)
    store = ingest_csv(args.data)
    split = make_split(
        store,
        cfg.train_frac,
        cfg.val_frac,
        inductive_fraction=cfg.inductive_fraction,
        seed=cfg.seed,
        mode=cfg.setting,
    )
    os.makedirs(args.out, exist_ok=True)
    ap, auc, result = _train_and_test(cfg, store, split, args.out)

    row = {
        "dataset": _dataset_name(args.data),
        "setting": cfg.setting,
        "strategy": cfg.strategy,
        "ap": ap,
        "auc": auc,
        "seed": cfg.seed,
    }
    preamble = [f"data = {_dataset_name(args.data)}"] + config_lines(cfg)
    write_metric_rows(os.path.join(args.out, METRICS_NAME), [row], preamble)

    fig = plot_training_curves(
        os.path.join(args.out, TRAIN_LOG_NAME),
        os.path.join(args.out, "training_curves.png"),
    )
    if result.history:
        print(
            f"best val AP {result.best_val_ap:.4f} at epoch {result.best_epoch}"
            + (" (stopped early)" if result.stopped_early else "")
        )
    print(f"test AP {ap:.4f}  test AUC {auc:.4f}")
    print(f"outputs in {args.out}" + (f" (figure: {os.path.basename(fig)})" if fig else ""))
    return 0


def cmd_evaluate(args):
    cfg = _config_from(args)
    _echo_config(cfg)
    model, extras, _ = load_checkpoint(args.checkpoint)
    store = ingest_csv(args.data)
    split = make_split(
        store,
        cfg.train_frac,
        cfg.val_frac,
        inductive_fraction=cfg.inductive_fraction,
        seed=cfg.seed,
        mode=cfg.setting,
    )
    ap, auc = evaluate_model(
        model,
        store,
        split,
        partition="test",
        setting=cfg.setting,
        strategy=cfg.strategy,
        length=extras["length"],
        batch_size=cfg.batch_size,
        seed=cfg.seed,
    )
    row = {
        "dataset": _dataset_name(args.data),
        "setting": cfg.setting,
        "strategy": cfg.strategy,
        "ap": ap,
        "auc": auc,
        "seed": cfg.seed,
    }
    os.makedirs(args.out, exist_ok=True)
    preamble = [
        f"data = {_dataset_name(args.data)}",
        f"checkpoint = {os.path.basename(args.checkpoint)}",
    ] + config_lines(cfg)
    write_metric_rows(os.path.join(args.out, METRICS_NAME), [row], preamble)
    print(f"test AP {ap:.4f}  test AUC {auc:.4f}")
    return 0


def _gradcheck_config(args):
    if getattr(args, "config", None) is None:
        overrides = _overrides_from(args)
        overrides.setdefault("kernel_sizes", (1, 3))
        cfg = load_config(None, overrides)
        return replace(cfg, d=8, heads=2, n_layers=1, length=4)
    return _config_from(args)


def cmd_gradcheck(args):
    cfg = _gradcheck_config(args)
    if cfg.d > 16 or cfg.length > 8:
        raise ConfigError(
            "gradient checking runs in 64-bit at desk scale; "
            f"need d <= 16 and length <= 8, got d={cfg.d} length={cfg.length}"
        )
    _echo_config(cfg)

    data = generate(SyntheticSpec(n_nodes=10, n_events=80, seed=cfg.seed))
    store = to_store(data)
    split = make_split(
        store,
        cfg.train_frac,
        cfg.val_frac,
        inductive_fraction=cfg.inductive_fraction,
        seed=cfg.seed,
    )
    idx = partition_indices(store, split)["train"][-3:]
    sampler = NegativeSampler(store, split, "random", seed=cfg.seed)
    src, dst, t = store.src[idx], store.dst[idx], store.ts[idx]
    neg_src, neg_dst = sampler.sample(src, dst, t)
    batch = build_pair_batch(
        store,
        np.concatenate([src, neg_src]),
        np.concatenate([dst, neg_dst]),
        np.concatenate([t, t]),
        cfg.length,
    )
    labels = np.concatenate([np.ones(len(idx)), np.zeros(len(idx))])

    model = TFWaveFormer(**model_kwargs(cfg, store.d_e), dtype=np.float64)
    report = check_model_gradients(model, batch, labels)
    lines, passed = report_lines(report, PASS_THRESHOLD)
    for line in lines:
        print(line)
    print(f"groups checked: {len(report)}")
    return 0 if passed else 1


def _parse_m_values(text):
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"--m-values expects comma-separated integers, got {text!r}") from None
    if not values:
        raise ConfigError("--m-values must name at least one scale count")
    for m in values:
        if not 1 <= m <= MAX_SCALES:
            raise ConfigError(f"scale counts must lie in 1..{MAX_SCALES}, got {m}")
    return values


def cmd_sweep_m(args):
    cfg = _config_from(args)
    m_values = _parse_m_values(args.m_values)
    _echo_config(cfg)
    store = ingest_csv(args.data)
    split = make_split(
        store,
        cfg.train_frac,
        cfg.val_frac,
        inductive_fraction=cfg.inductive_fraction,
        seed=cfg.seed,
        mode=cfg.setting,
    )
    os.makedirs(args.out, exist_ok=True)

    def run_one(m):
        cfg_m = replace(cfg, kernel_sizes=tuple(default_kernel_sizes(m)))
        sub_dir = os.path.join(args.out, f"m{m}")
        ap, auc, _ = _train_and_test(cfg_m, store, split, sub_dir, quiet=True)
        print(f"m={m}: test AP {ap:.4f}  test AUC {auc:.4f}")
        return m, ap, auc

    if args.parallel and args.parallel > 1:
        with ThreadPoolExecutor(max_workers=args.parallel) as pool:
            rows = list(pool.map(run_one, m_values))
    else:
        rows = [run_one(m) for m in m_values]

    csv_path = os.path.join(args.out, SWEEP_CSV_NAME)
    with open(csv_path, "w", newline="") as fh:
        fh.write(f"# data = {_dataset_name(args.data)}\n")
        for line in config_lines(cfg):
            fh.write(f"# {line}\n")
        fh.write("m,ap,auc\n")
        for m, ap, auc in rows:
            fh.write(f"{m},{ap:.6f},{auc:.6f}\n")
    plot_scale_sweep(csv_path, os.path.join(args.out, "sweep_m.png"))
    print(f"sweep written to {csv_path}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tfwaveformer",
        description="Temporal-frequency link prediction on event streams.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=True, out=True):
        p.add_argument("--config", help="flat key = value settings file")
        if data:
            p.add_argument("--data", required=True, help="event CSV (src,dst,ts[,...])")
        if out:
            p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="run seed")
        p.add_argument(
            "--setting", choices=("transductive", "inductive"), help="evaluation setting"
        )
        p.add_argument(
            "--strategy",
            choices=("random", "historical", "inductive"),
            help="negative sampling strategy",
        )

    p_synth = sub.add_parser("synth", help="write a planted-periodicity event CSV")
    p_synth.add_argument("--out", required=True, help="output CSV path")
    p_synth.add_argument("--nodes", type=int, default=50)
    p_synth.add_argument("--events", type=int, default=2000)
    p_synth.add_argument("--period-short", type=float, default=5.0)
    p_synth.add_argument("--period-long", type=float, default=40.0)
    p_synth.add_argument("--noise", type=float, default=0.2)
    p_synth.add_argument("--horizon", type=float, default=0.0)
    p_synth.add_argument("--seed", type=int, default=42)
    p_synth.set_defaults(handler=cmd_synth)

    p_train = sub.add_parser("train", help="train and score on the test partition")
    common(p_train)
    p_train.add_argument("--epochs", type=int, help="override epoch count")
    p_train.add_argument("--m", type=int, help="use the default kernel ladder of m scales")
    p_train.add_argument(
        "--disable-temporal", action="store_const", const=True, default=None,
        help="drop the time-domain stream",
    )
    p_train.add_argument(
        "--disable-frequency", action="store_const", const=True, default=None,
        help="drop the multi-scale stream",
    )
    p_train.set_defaults(handler=cmd_train)

    p_eval = sub.add_parser("evaluate", help="score a saved checkpoint")
    common(p_eval)
    p_eval.add_argument("--checkpoint", required=True, help="model file from train")
    p_eval.set_defaults(handler=cmd_evaluate)

    p_grad = sub.add_parser("gradcheck", help="finite-difference gradient audit")
    p_grad.add_argument("--config", help="flat key = value settings file")
    p_grad.add_argument("--seed", type=int, help="run seed")
    p_grad.set_defaults(handler=cmd_gradcheck)

    p_sweep = sub.add_parser("sweep-m", help="train across scale counts")
    common(p_sweep)
    p_sweep.add_argument("--epochs", type=int, help="override epoch count")
    p_sweep.add_argument(
        "--m-values", default="1,2,3", help="comma-separated scale counts (each 1..5)"
    )
    p_sweep.add_argument(
        "--parallel", type=int, default=1, help="thread count for independent runs"
    )
    p_sweep.set_defaults(handler=cmd_sweep_m)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 3
    except TfwError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
