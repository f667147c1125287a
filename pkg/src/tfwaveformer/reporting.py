"""Figure rendering for run outputs.

Training and sweep commands write delimited logs first; these helpers turn
those files into PNG companions saved next to them. Rendering is headless
(Agg) so runs work without a display.
"""

from __future__ import annotations

import csv

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def _read_rows(path):
    """Read a delimited file, skipping '#' preamble lines before the header."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = None
        rows = []
        for row in reader:
            if not row or row[0].lstrip().startswith("#"):
                continue
            if header is None:
                header = row
            else:
                rows.append(row)
    return header, rows


def plot_training_curves(log_path, fig_path):
    """Render loss and validation ranking curves from a training log.

    Returns the figure path, or None when the log has no epoch rows (a
    zero-epoch run leaves just the header).
    """
    header, rows = _read_rows(log_path)
    if not rows:
        return None
    epochs = [int(r[0]) for r in rows]
    loss = [float(r[1]) for r in rows]
    val_ap = [float(r[2]) for r in rows]
    val_auc = [float(r[3]) for r in rows]

    fig, ax_loss = plt.subplots(figsize=(7, 4))
    ax_loss.plot(epochs, loss, color="tab:red", marker="o", label="train loss")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("train loss", color="tab:red")
    ax_loss.tick_params(axis="y", labelcolor="tab:red")

    ax_rank = ax_loss.twinx()
    ax_rank.plot(epochs, val_ap, color="tab:blue", marker="s", label="val AP")
    ax_rank.plot(
        epochs, val_auc, color="tab:blue", marker="^", linestyle="--", label="val AUC"
    )
    ax_rank.set_ylabel("validation ranking", color="tab:blue")
    ax_rank.tick_params(axis="y", labelcolor="tab:blue")
    ax_rank.set_ylim(0.0, 1.05)

    lines = ax_loss.get_lines() + ax_rank.get_lines()
    ax_loss.legend(lines, [ln.get_label() for ln in lines], loc="center right")
    ax_loss.set_title("training progress")
    fig.tight_layout()
    fig.savefig(fig_path, dpi=120)
    plt.close(fig)
    return fig_path


def plot_scale_sweep(csv_path, fig_path):
    """Render AP/AUC against the number of decomposition scales."""
    header, rows = _read_rows(csv_path)
    if not rows:
        return None
    ms = [int(r[0]) for r in rows]
    ap = [float(r[1]) for r in rows]
    auc = [float(r[2]) for r in rows]

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ms, ap, marker="o", label="test AP")
    ax.plot(ms, auc, marker="s", linestyle="--", label="test AUC")
    ax.set_xlabel("number of scales m")
    ax.set_ylabel("score")
    ax.set_xticks(ms)
    ax.set_ylim(0.0, 1.05)
    ax.legend()
    ax.set_title("scale-count sensitivity")
    fig.tight_layout()
    fig.savefig(fig_path, dpi=120)
    plt.close(fig)
    return fig_path
