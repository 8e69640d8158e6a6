"""Quantitative evaluation: Fréchet distance between feature sets,
mask quality against ground truth, and local-translation fidelity.

Desk-scale feature extractors stand in for the canonical embedding
network; absolute distances are only comparable between models evaluated
with the same extractor.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import torch
import torch.nn as nn

from .data import Dataset
from .errors import DimensionError, NumericError
from .networks import LOMITModel


@dataclass(frozen=True)
class FeatureExtractor:
    name: str
    dim: int
    fn: Callable[[torch.Tensor], np.ndarray]

    def __call__(self, images: torch.Tensor) -> np.ndarray:
        feats = self.fn(images)
        if feats.shape[1] != self.dim:
            raise DimensionError(f"extractor {self.name} produced dim {feats.shape[1]}, declared {self.dim}")
        return feats


def make_conv_extractor(resolution: int = 64, dim: int = 64, seed: int = 0) -> FeatureExtractor:
    """Fixed-seed randomly initialized convolutional embedder."""
    gen = torch.Generator().manual_seed(seed)
    layers = []
    channels = [3, 16, 32, 64, dim]
    for cin, cout in zip(channels[:-1], channels[1:]):
        conv = nn.Conv2d(cin, cout, 4, stride=2, padding=1)
        with torch.no_grad():
            conv.weight.copy_(torch.randn(conv.weight.shape, generator=gen) * 0.2)
            conv.bias.zero_()
        layers += [conv, nn.LeakyReLU(0.2)]
    net = nn.Sequential(*layers).eval()
    for p in net.parameters():
        p.requires_grad_(False)

    def fn(images: torch.Tensor) -> np.ndarray:
        with torch.no_grad():
            return net(images).mean(dim=(2, 3)).numpy()

    return FeatureExtractor(name=f"conv{dim}-seed{seed}", dim=dim, fn=fn)


def make_pixel_extractor(size: int = 8) -> FeatureExtractor:
    """Raw downsampled-pixel features."""
    def fn(images: torch.Tensor) -> np.ndarray:
        with torch.no_grad():
            small = torch.nn.functional.adaptive_avg_pool2d(images, size)
            return small.flatten(1).numpy()

    return FeatureExtractor(name=f"pixel{size}", dim=3 * size * size, fn=fn)


def sqrtm_psd(m: np.ndarray) -> np.ndarray:
    """Matrix square root of a symmetric PSD matrix via eigendecomposition."""
    sym = (m + m.T) / 2.0
    w, v = np.linalg.eigh(sym)
    if w.min() < -1e-8 * max(1.0, abs(w.max())):
        warnings.warn(f"matrix has negative eigenvalue {w.min():.3g}; clipping to zero")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.T


def frechet_distance(feats_a: np.ndarray, feats_b: np.ndarray) -> float:
    """d^2 = ||mu_a - mu_b||^2 + Tr(Ca + Cb - 2 (Ca Cb)^{1/2})."""
    feats_a = np.asarray(feats_a, dtype=np.float64)
    feats_b = np.asarray(feats_b, dtype=np.float64)
    if feats_a.ndim != 2 or feats_b.ndim != 2 or feats_a.shape[1] != feats_b.shape[1]:
        raise DimensionError(f"feature sets must be (n, F) with equal F: {feats_a.shape} vs {feats_b.shape}")
    if not (np.isfinite(feats_a).all() and np.isfinite(feats_b).all()):
        raise NumericError("non-finite values in feature sets")
    f = feats_a.shape[1]
    if min(len(feats_a), len(feats_b)) < f + 1:
        warnings.warn(
            f"feature set smaller than F+1={f + 1}; covariance is rank-deficient", stacklevel=2
        )
    mu_a, mu_b = feats_a.mean(axis=0), feats_b.mean(axis=0)
    cov_a = np.atleast_2d(np.cov(feats_a, rowvar=False))
    cov_b = np.atleast_2d(np.cov(feats_b, rowvar=False))
    # Tr((Ca Cb)^{1/2}) = Tr((Ca^{1/2} Cb Ca^{1/2})^{1/2}), symmetric PSD inside.
    sa = sqrtm_psd(cov_a)
    tr_sqrt = np.trace(sqrtm_psd(sa @ cov_b @ sa))
    d2 = float(np.sum((mu_a - mu_b) ** 2) + np.trace(cov_a) + np.trace(cov_b) - 2.0 * tr_sqrt)
    return max(d2, 0.0)


def mask_iou(m: np.ndarray | torch.Tensor, truth: np.ndarray | torch.Tensor, threshold: float = 0.5) -> float:
    """IoU of the thresholded mask against binary truth; empty union -> 1."""
    m = np.asarray(m if not isinstance(m, torch.Tensor) else m.numpy())
    truth = np.asarray(truth if not isinstance(truth, torch.Tensor) else truth.numpy())
    if m.shape != truth.shape:
        raise DimensionError(f"mask {m.shape} vs truth {truth.shape}")
    pred = m >= threshold
    tru = truth >= 0.5
    union = np.logical_or(pred, tru).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(pred, tru).sum() / union)


@dataclass
class FidelityResult:
    fg_transfer_error: float
    bg_preservation_error: float
    undefined_fg: bool = False
    undefined_bg: bool = False


def local_fidelity(
    x_in: np.ndarray,
    x_out: np.ndarray,
    exemplar: np.ndarray,
    m_in: np.ndarray,
    m_ex: np.ndarray,
) -> FidelityResult:
    """Foreground color-transfer error and background preservation error.

    fg error: |masked mean color of the output - masked mean color of the
    exemplar|, averaged over channels. bg error: mean |out - in| weighted
    by (1 - m_in). All-zero mask regions are flagged, not raised.
    """
    for name, arr in (("x_in", x_in), ("x_out", x_out), ("exemplar", exemplar)):
        if arr.shape != x_in.shape:
            raise DimensionError(f"{name} shape {arr.shape} differs from input {x_in.shape}")
    if m_in.shape[-2:] != x_in.shape[-2:] or m_ex.shape[-2:] != exemplar.shape[-2:]:
        raise DimensionError("mask spatial dims do not match images")

    w_in = m_in.reshape(1, *m_in.shape[-2:])
    w_ex = m_ex.reshape(1, *m_ex.shape[-2:])
    undefined_fg = w_in.sum() == 0 or w_ex.sum() == 0
    if undefined_fg:
        fg_err = 0.0
    else:
        mean_out = (x_out * w_in).sum(axis=(1, 2)) / w_in.sum()
        mean_ex = (exemplar * w_ex).sum(axis=(1, 2)) / w_ex.sum()
        fg_err = float(np.abs(mean_out - mean_ex).mean())

    w_bg = 1.0 - w_in
    undefined_bg = w_bg.sum() == 0
    if undefined_bg:
        bg_err = 0.0
    else:
        bg_err = float((np.abs(x_out - x_in) * w_bg).sum() / (w_bg.sum() * x_in.shape[0]))
    return FidelityResult(fg_err, bg_err, undefined_fg, undefined_bg)


@dataclass
class SampleRecord:
    image: str
    iou: float
    fg_err: float
    bg_err: float


@dataclass
class EvalReport:
    frechet: Dict[str, float]
    frechet_untranslated: Dict[str, float]
    mask_iou: float
    fg_transfer_error: float
    bg_preservation_error: float
    sample_count: int
    extractor: str
    warnings: List[str] = field(default_factory=list)
    samples: List[SampleRecord] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        d = json.loads(text)
        d["samples"] = [SampleRecord(**s) for s in d.get("samples", [])]
        return cls(**d)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["image", "iou", "fg_err", "bg_err"])
            for s in self.samples:
                writer.writerow([s.image, f"{s.iou:.6f}", f"{s.fg_err:.6f}", f"{s.bg_err:.6f}"])


def _translate_all(
    model: LOMITModel,
    inputs: np.ndarray,
    exemplars: np.ndarray,
    chunk: int = 16,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    outs, masks_in, masks_ex = [], [], []
    with torch.no_grad():
        for i in range(0, len(inputs), chunk):
            res = model.translate(
                torch.from_numpy(inputs[i : i + chunk]),
                torch.from_numpy(exemplars[i : i + chunk]),
            )
            outs.append(res.output.numpy())
            masks_in.append(res.input_mask.numpy())
            masks_ex.append(res.exemplar_mask.numpy())
    return np.concatenate(outs), np.concatenate(masks_in), np.concatenate(masks_ex)


def evaluate(
    model: LOMITModel,
    dataset: Dataset,
    extractor: FeatureExtractor,
    seed: int = 0,
    max_samples: Optional[int] = None,
) -> EvalReport:
    """Translate both directions with random target-domain exemplars and score."""
    rng = np.random.default_rng(seed)
    report_warnings: List[str] = []
    records: List[SampleRecord] = []
    frechet: Dict[str, float] = {}
    frechet_untr: Dict[str, float] = {}
    ious, fg_errs, bg_errs = [], [], []

    directions = [
        ("a_to_b", dataset.images_a, dataset.masks_a, dataset.images_b),
        ("b_to_a", dataset.images_b, dataset.masks_b, dataset.images_a),
    ]
    model.eval()
    for name, src, src_masks, tgt in directions:
        n = len(src) if max_samples is None else min(len(src), max_samples)
        src = src[:n]
        ex_idx = rng.integers(0, len(tgt), size=n)
        exemplars = tgt[ex_idx]
        outs, m_in, m_ex = _translate_all(model, src, exemplars)

        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            feats_out = extractor(torch.from_numpy(outs))
            feats_tgt = extractor(torch.from_numpy(tgt))
            feats_src = extractor(torch.from_numpy(src))
            frechet[name] = frechet_distance(feats_out, feats_tgt)
            frechet_untr[name] = frechet_distance(feats_src, feats_tgt)
        report_warnings += [f"{name}: {w.message}" for w in caught]

        for i in range(n):
            iou = mask_iou(m_in[i], src_masks[i]) if src_masks is not None else float("nan")
            fid = local_fidelity(src[i], outs[i], exemplars[i], m_in[i], m_ex[i])
            if fid.undefined_fg:
                report_warnings.append(f"{name}[{i}]: undefined foreground region")
            if src_masks is not None:
                ious.append(iou)
            fg_errs.append(fid.fg_transfer_error)
            bg_errs.append(fid.bg_preservation_error)
            records.append(SampleRecord(f"{name}/{i:05d}", iou, fid.fg_transfer_error, fid.bg_preservation_error))

    return EvalReport(
        frechet=frechet,
        frechet_untranslated=frechet_untr,
        mask_iou=float(np.mean(ious)) if ious else float("nan"),
        fg_transfer_error=float(np.mean(fg_errs)),
        bg_preservation_error=float(np.mean(bg_errs)),
        sample_count=len(records),
        extractor=extractor.name,
        warnings=report_warnings,
        samples=records,
    )
