"""Matplotlib figure rendering for evaluation reports and training logs."""

from __future__ import annotations

import json
from pathlib import Path
from typing import List, Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import torch

from .data import Dataset
from .evaluation import EvalReport
from .networks import LOMITModel


def _to_img(arr: np.ndarray) -> np.ndarray:
    return np.clip((arr.transpose(1, 2, 0) + 1.0) / 2.0, 0, 1)


def render_sample_grid(
    model: LOMITModel,
    dataset: Dataset,
    path: str | Path,
    rows: int = 6,
    seed: int = 0,
) -> Path:
    """Input / input-mask / exemplar / exemplar-mask / output grid."""
    rng = np.random.default_rng(seed)
    idx_a = rng.choice(len(dataset.images_a), size=min(rows, len(dataset.images_a)), replace=False)
    idx_b = rng.choice(len(dataset.images_b), size=len(idx_a), replace=False)
    x1 = torch.from_numpy(dataset.images_a[idx_a])
    x2 = torch.from_numpy(dataset.images_b[idx_b])
    model.eval()
    with torch.no_grad():
        res = model.translate(x1, x2)

    cols = ["input", "input mask", "exemplar", "exemplar mask", "output"]
    fig, axes = plt.subplots(len(idx_a), 5, figsize=(11, 2.2 * len(idx_a)))
    axes = np.atleast_2d(axes)
    for r in range(len(idx_a)):
        panels = [
            _to_img(x1[r].numpy()),
            res.input_mask[r, 0].numpy(),
            _to_img(x2[r].numpy()),
            res.exemplar_mask[r, 0].numpy(),
            _to_img(res.output[r].numpy()),
        ]
        for c, panel in enumerate(panels):
            ax = axes[r, c]
            if panel.ndim == 2:
                ax.imshow(panel, cmap="gray", vmin=0, vmax=1)
            else:
                ax.imshow(panel)
            ax.set_xticks([])
            ax.set_yticks([])
            if r == 0:
                ax.set_title(cols[c], fontsize=10)
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=110)
    plt.close(fig)
    return out


def render_metric_hist(report: EvalReport, path: str | Path) -> Path:
    """Histograms of the per-sample metrics."""
    fig, axes = plt.subplots(1, 3, figsize=(11, 3))
    series = [
        ("mask IoU", [s.iou for s in report.samples if np.isfinite(s.iou)]),
        ("fg transfer error", [s.fg_err for s in report.samples]),
        ("bg preservation error", [s.bg_err for s in report.samples]),
    ]
    for ax, (label, values) in zip(axes, series):
        if values:
            ax.hist(values, bins=30, color="#4878a8")
        ax.set_xlabel(label)
        ax.set_ylabel("count")
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=110)
    plt.close(fig)
    return out


def render_loss_curves(log_path: str | Path, path: str | Path, terms: Optional[List[str]] = None) -> Path:
    """Loss trajectories from a newline-delimited training log."""
    iterations, losses = [], {}
    with open(log_path) as f:
        for line in f:
            rec = json.loads(line)
            iterations.append(rec["iteration"])
            for k, v in rec["losses"].items():
                losses.setdefault(k, []).append(v)
    terms = terms or ["cycle", "style_fg", "style_bg", "content", "total_g", "total_d"]
    fig, ax = plt.subplots(figsize=(9, 4.5))
    for term in terms:
        if term in losses:
            ax.plot(iterations, losses[term], label=term, linewidth=1)
    ax.set_xlabel("iteration")
    ax.set_ylabel("loss")
    ax.set_yscale("symlog", linthresh=1e-3)
    ax.legend(fontsize=8, ncol=3)
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=110)
    plt.close(fig)
    return out
