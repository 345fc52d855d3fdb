"""Figure rendering for training reports.

Renders per-epoch curves from one or more report CSVs into PNG files and
writes a delimited summary of the final-epoch metrics next to them. Uses
the Agg backend so rendering works headless and produces identical bytes
for identical inputs.
"""

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_FIGSIZE = (6.0, 4.0)
_DPI = 150


def _series(rows, key):
    return np.array([row["epoch"] for row in rows]), np.array([row[key] for row in rows])


def _line_figure(named_reports, key, ylabel, path, logy=False):
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    for label, rows in named_reports:
        epochs, values = _series(rows, key)
        ax.plot(epochs, values, marker="o", markersize=3, label=label)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel("epoch")
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def _panel_figure(named_reports, keys, ylabels, path):
    fig, axes = plt.subplots(1, len(keys), figsize=(3.2 * len(keys), 3.2))
    for ax, key, ylabel in zip(np.atleast_1d(axes), keys, ylabels):
        for label, rows in named_reports:
            epochs, values = _series(rows, key)
            ax.plot(epochs, values, label=label)
        ax.set_xlabel("epoch")
        ax.set_ylabel(ylabel)
        ax.grid(True, alpha=0.3)
    np.atleast_1d(axes)[0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def render_report(named_reports, out_dir):
    """Render curves and a summary CSV; returns the list of written paths.

    ``named_reports`` is a list of (label, rows) where rows come from
    :func:`topoalign.trainer.read_report`.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []

    all_disc = [row["discrepancy_heldout"] for _, rows in named_reports for row in rows]
    logy = all(v > 0 for v in all_disc)
    path = os.path.join(out_dir, "discrepancy.png")
    _line_figure(named_reports, "discrepancy_heldout", "held-out structure discrepancy",
                 path, logy=logy)
    written.append(path)

    path = os.path.join(out_dir, "accuracy.png")
    _line_figure(named_reports, "accuracy", "held-out accuracy", path)
    written.append(path)

    path = os.path.join(out_dir, "losses.png")
    _panel_figure(named_reports, ("L_cls", "L_sa"),
                  ("classification loss", "alignment loss"), path)
    written.append(path)

    path = os.path.join(out_dir, "mixture.png")
    _panel_figure(named_reports, ("pi", "sigma", "omega"),
                  ("prior", "variance", "half-width"), path)
    written.append(path)

    path = os.path.join(out_dir, "summary.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("label,epochs,final_L_cls,final_L_sa,final_discrepancy,final_accuracy\n")
        for label, rows in named_reports:
            last = rows[-1]
            fh.write(
                f"{label},{last['epoch']},"
                + ",".join(
                    format(last[k], ".12g")
                    for k in ("L_cls", "L_sa", "discrepancy_heldout", "accuracy")
                )
                + "\n"
            )
    written.append(path)
    return written
