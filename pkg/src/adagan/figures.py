"""Training report figures rendered next to the CSV outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _series(rows, x_key, y_key):
    xs, ys = [], []
    for row in rows:
        y = row.get(y_key)
        if y is None:
            continue
        xs.append(row[x_key])
        ys.append(y)
    return xs, ys


def save_training_figures(report_rows, trainlog_rows, out_dir) -> list[str]:
    """Render metric, controller, and loss curves; returns written paths."""
    out_dir = Path(out_dir)
    paths = []

    fig, axes = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    for ax, key in zip(axes, ("fid", "kid")):
        ax.plot(*_series(report_rows, "kimg", key), marker="o", lw=1.2)
        ax.set_ylabel(key.upper())
        ax.grid(alpha=0.3)
    axes[1].set_xlabel("thousands of real images shown")
    axes[0].set_title("distribution distances per snapshot")
    fig.tight_layout()
    path = out_dir / "metric_curves.png"
    fig.savefig(path, dpi=110)
    plt.close(fig)
    paths.append(str(path))

    fig, ax = plt.subplots(figsize=(7, 3.6))
    ax.plot(*_series(trainlog_rows, "kimg", "p"), lw=1.2, label="augmentation p")
    xs, ys = _series(trainlog_rows, "kimg", "r_t")
    ax.plot(xs, ys, lw=0.8, alpha=0.7, label="r_t")
    xs, ys = _series(trainlog_rows, "kimg", "r_v")
    if xs:
        ax.plot(xs, ys, lw=0.8, alpha=0.7, label="r_v")
    ax.set_xlabel("thousands of real images shown")
    ax.set_title("augmentation controller trace")
    ax.grid(alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    path = out_dir / "controller_trace.png"
    fig.savefig(path, dpi=110)
    plt.close(fig)
    paths.append(str(path))

    fig, ax = plt.subplots(figsize=(7, 3.6))
    ax.plot(*_series(trainlog_rows, "kimg", "loss_d"), lw=0.7, label="discriminator")
    ax.plot(*_series(trainlog_rows, "kimg", "loss_g"), lw=0.7, label="generator")
    ax.set_xlabel("thousands of real images shown")
    ax.set_title("adversarial losses")
    ax.grid(alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    path = out_dir / "loss_curves.png"
    fig.savefig(path, dpi=110)
    plt.close(fig)
    paths.append(str(path))
    return paths
