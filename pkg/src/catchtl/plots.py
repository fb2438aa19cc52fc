"""Static SVG figures comparing the naive and transfer model output.

Two figures: posterior abundance trajectories over years (naive grey,
transfer red, truth as blue crosses when provided) and the posterior
Mann-Kendall trend distributions per size class. Files are written
atomically; no interactive display.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .chains import PosteriorChains
from .cpue import rescale_naive
from .errors import ValidationError
from .metrics import mann_kendall_u, mk_posterior
from .transfer import extract_abundance_star

NAIVE_COLOR = "0.35"
TRANSFER_COLOR = "tab:red"

plt.rcParams["svg.hashsalt"] = "catchtl"


def _save_svg(fig, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        fig.savefig(tmp, format="svg", metadata={"Date": None})
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    finally:
        plt.close(fig)


def comparison_draws(
    naive: PosteriorChains, transfer: PosteriorChains, phat
) -> tuple[np.ndarray, np.ndarray, list[int], list[int]]:
    """Abundance-scale draws for both models plus shared axis labels.

    ``phat`` is the per-class mean detection from the capture-recapture fit,
    used to put the naive rates on the abundance scale.
    """
    if naive.info.get("model") != "cpue_naive":
        raise ValidationError("expected naive-model chains")
    naive_draws = rescale_naive(np.exp(naive.get("log_rate")), np.asarray(phat, dtype=float))
    transfer_draws = extract_abundance_star(transfer)
    years = naive.info["years"]
    classes = naive.info["size_classes"]
    if transfer.info["years"] != years or transfer.info["size_classes"] != classes:
        raise ValidationError("naive and transfer chains cover different years or classes")
    return naive_draws, transfer_draws, years, classes


def plot_abundance_trajectories(
    naive: PosteriorChains,
    transfer: PosteriorChains,
    phat,
    out_path,
    truth: np.ndarray | None = None,
) -> Path:
    """Posterior abundance over years, one panel per size class."""
    naive_draws, transfer_draws, years, classes = comparison_draws(naive, transfer, phat)
    j_n = len(classes)
    fig, axes = plt.subplots(j_n, 1, figsize=(8.0, 3.0 * j_n), squeeze=False, sharex=True)
    xs = np.asarray(years, dtype=float)
    for j, ax in enumerate(axes[:, 0]):
        for draws, color, label, shift in (
            (naive_draws, NAIVE_COLOR, "naive", -0.15),
            (transfer_draws, TRANSFER_COLOR, "transfer", 0.15),
        ):
            lo, mid, hi = np.quantile(draws[:, :, j], [0.025, 0.5, 0.975], axis=0)
            ax.vlines(xs + shift, lo, hi, color=color, lw=2.0, alpha=0.8)
            ax.plot(xs + shift, mid, "o", color=color, ms=3.5, label=label)
        if truth is not None:
            ax.plot(xs, truth[:, j], "x", color="tab:blue", ms=6.0, label="truth")
        ax.set_ylabel(f"abundance, class {classes[j]}")
        ax.set_yscale("log")
        if j == 0:
            ax.legend(loc="best", frameon=False)
    axes[-1, 0].set_xlabel("year")
    fig.tight_layout()
    out_path = Path(out_path)
    _save_svg(fig, out_path)
    return out_path


def plot_trend_posteriors(
    naive: PosteriorChains,
    transfer: PosteriorChains,
    phat,
    out_path,
    truth: np.ndarray | None = None,
) -> Path:
    """Posterior Mann-Kendall statistic distributions, one panel per size class."""
    naive_draws, transfer_draws, years, classes = comparison_draws(naive, transfer, phat)
    j_n = len(classes)
    fig, axes = plt.subplots(1, j_n, figsize=(4.5 * j_n, 3.4), squeeze=False)
    for j, ax in enumerate(axes[0, :]):
        u_naive = mk_posterior(naive_draws[:, :, j])
        u_transfer = mk_posterior(transfer_draws[:, :, j])
        bins = np.histogram_bin_edges(np.concatenate([u_naive, u_transfer]), bins=40)
        ax.hist(u_naive, bins=bins, color=NAIVE_COLOR, alpha=0.6, density=True, label="naive")
        ax.hist(
            u_transfer, bins=bins, color=TRANSFER_COLOR, alpha=0.6, density=True,
            label="transfer",
        )
        if truth is not None:
            ax.axvline(
                mann_kendall_u(truth[:, j].astype(float)), color="tab:blue", ls="--",
                label="truth",
            )
        ax.set_xlabel(f"trend statistic, class {classes[j]}")
        if j == 0:
            ax.set_ylabel("posterior density")
            ax.legend(loc="best", frameon=False)
    fig.tight_layout()
    out_path = Path(out_path)
    _save_svg(fig, out_path)
    return out_path
