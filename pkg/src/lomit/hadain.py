"""Mask splitting, channel statistics, AdaIN, and the highway AdaIN blend.

Pure differentiable functions over torch tensors. Images are
(B, 3, H, W) in [-1, 1], masks are (B, 1, H, W) in [0, 1], content codes
are (B, C, Hc, Wc). No learned parameters live here.
"""

from __future__ import annotations

from typing import NamedTuple, Tuple

import torch
import torch.nn.functional as F

from .errors import DimensionError, DomainError

# Variance stabilizer: sigma = sqrt(var + EPS), population variance.
EPS = 1e-5


class AffineParams(NamedTuple):
    """Per-channel affine parameters, each of shape (B, C)."""

    gamma: torch.Tensor
    beta: torch.Tensor


def _check_mask_range(m: torch.Tensor) -> None:
    if m.numel() and (m.min() < 0 or m.max() > 1):
        raise DomainError(
            f"mask values must lie in [0, 1], got range "
            f"[{float(m.min()):.4g}, {float(m.max()):.4g}]"
        )


def split_by_mask(x: torch.Tensor, m: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
    """Split x into foreground m*x and background (1-m)*x.

    The mask has a single channel and broadcasts across x's channels.
    fg + bg reconstructs x exactly up to additive round-off.
    """
    if x.dim() != 4 or m.dim() != 4 or m.shape[1] != 1:
        raise DimensionError(f"expected x (B,C,H,W) and m (B,1,H,W), got {tuple(x.shape)} / {tuple(m.shape)}")
    if x.shape[0] != m.shape[0] or x.shape[2:] != m.shape[2:]:
        raise DimensionError(f"x {tuple(x.shape)} and m {tuple(m.shape)} disagree on batch/spatial dims")
    _check_mask_range(m)
    return m * x, (1.0 - m) * x


def channel_stats(c: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
    """Per-sample per-channel spatial mean and stabilized std.

    Population (biased) variance; sigma = sqrt(var + EPS) so sigma > 0
    even for constant channels.
    """
    if c.dim() != 4 or c.shape[2] * c.shape[3] == 0:
        raise DimensionError(f"expected non-empty (B,C,H,W) feature map, got {tuple(c.shape)}")
    mu = c.mean(dim=(2, 3))
    var = c.var(dim=(2, 3), unbiased=False)
    return mu, torch.sqrt(var + EPS)


def adain(c: torch.Tensor, params: AffineParams) -> torch.Tensor:
    """gamma * (c - mu(c)) / sigma(c) + beta, per channel."""
    if params.gamma.shape != params.beta.shape:
        raise DimensionError("gamma and beta shapes differ")
    if params.gamma.dim() != 2 or params.gamma.shape != c.shape[:2]:
        raise DimensionError(
            f"affine params {tuple(params.gamma.shape)} do not match content batch/channels {tuple(c.shape[:2])}"
        )
    mu, sigma = channel_stats(c)
    g = params.gamma.unsqueeze(-1).unsqueeze(-1)
    b = params.beta.unsqueeze(-1).unsqueeze(-1)
    return g * (c - mu.unsqueeze(-1).unsqueeze(-1)) / sigma.unsqueeze(-1).unsqueeze(-1) + b


def hadain(
    m: torch.Tensor,
    c1: torch.Tensor,
    fg_params: AffineParams,
    bg_params: AffineParams,
) -> torch.Tensor:
    """Highway blend m * adain(c1, fg) + (1 - m) * adain(c1, bg).

    The mask must already be at content resolution (one channel,
    broadcast across content channels).
    """
    if m.dim() != 4 or m.shape[1] != 1:
        raise DimensionError(f"expected mask (B,1,Hc,Wc), got {tuple(m.shape)}")
    if m.shape[0] != c1.shape[0] or m.shape[2:] != c1.shape[2:]:
        raise DimensionError(
            f"mask {tuple(m.shape)} and content {tuple(c1.shape)} disagree on batch/spatial dims"
        )
    _check_mask_range(m)
    return m * adain(c1, fg_params) + (1.0 - m) * adain(c1, bg_params)


def downsample_mask(m: torch.Tensor, target: Tuple[int, int]) -> torch.Tensor:
    """Area-average pool a full-resolution mask down to content resolution."""
    if m.dim() != 4 or m.shape[1] != 1:
        raise DimensionError(f"expected mask (B,1,H,W), got {tuple(m.shape)}")
    h, w = m.shape[2], m.shape[3]
    th, tw = target
    if th <= 0 or tw <= 0 or h % th or w % tw:
        raise DimensionError(f"target {target} does not divide mask resolution {(h, w)}")
    return F.avg_pool2d(m, kernel_size=(h // th, w // tw))
