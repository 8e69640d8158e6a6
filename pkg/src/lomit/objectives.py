"""Training losses: style/content/cycle reconstruction, mask regularizers,
Wasserstein adversarial terms with gradient penalty, and the auxiliary
attribute classification loss.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Callable, Dict

import torch
import torch.nn.functional as F

from .errors import ContractError, DimensionError, DomainError, NumericError


@dataclass(frozen=True)
class LossWeights:
    style_fg: float = 1.0
    style_bg: float = 1.0
    content: float = 1.0
    r1: float = 1e-4
    r2: float = 1e-3
    cycle: float = 10.0
    adv: float = 1.0
    cls: float = 1.0
    gp: float = 10.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not (value >= 0 and value < float("inf")):
                raise DomainError(f"loss weight {name} must be finite and >= 0, got {value}")


# Terms entering the generator-side total, in declaration order.
GENERATOR_TERMS = ("style_fg", "style_bg", "content", "r1", "r2", "cycle", "adv_g", "cls_g")
CRITIC_TERMS = ("adv_d", "gp", "cls_d")


@dataclass
class LossReport:
    """One named scalar per loss term plus the weighted totals."""

    terms: Dict[str, float] = field(default_factory=dict)
    total_g: float = 0.0
    total_d: float = 0.0

    def to_dict(self) -> Dict[str, float]:
        out = dict(self.terms)
        out["total_g"] = self.total_g
        out["total_d"] = self.total_d
        return out


def style_recon_loss(s_trans: torch.Tensor, s_ref: torch.Tensor) -> torch.Tensor:
    """Mean absolute difference between two style codes."""
    if s_trans.shape != s_ref.shape:
        raise DimensionError(f"style code shapes differ: {tuple(s_trans.shape)} vs {tuple(s_ref.shape)}")
    return (s_trans - s_ref).abs().mean()


def content_recon_loss(c_trans: torch.Tensor, c_in: torch.Tensor) -> torch.Tensor:
    """Mean absolute difference between two content feature maps."""
    if c_trans.shape != c_in.shape:
        raise DimensionError(f"content shapes differ: {tuple(c_trans.shape)} vs {tuple(c_in.shape)}")
    return (c_trans - c_in).abs().mean()


def cycle_loss(x_cyc: torch.Tensor, x_orig: torch.Tensor) -> torch.Tensor:
    """Mean absolute pixel difference for round-trip reconstruction."""
    if x_cyc.shape != x_orig.shape:
        raise DimensionError(f"image shapes differ: {tuple(x_cyc.shape)} vs {tuple(x_orig.shape)}")
    return (x_cyc - x_orig).abs().mean()


def mask_content_consistency_reg(
    m: torch.Tensor,
    c_hat: torch.Tensor,
    stop_content_grad: bool = True,
) -> torch.Tensor:
    """Pairwise mask-distance weighted by content cosine similarity.

    m: (B, WH) flattened mask values; c_hat: (B, WH, C) with unit-norm
    rows. Sums |m_i - m_j| * (c_hat_i . c_hat_j) over all pixel pairs,
    averaged over the batch. Gradients never flow through c_hat when
    stop_content_grad is set (the regularizer trains the mask, not the
    content encoder).
    """
    if m.dim() != 2 or c_hat.dim() != 3 or m.shape[:2] != c_hat.shape[:2]:
        raise DimensionError(
            f"expected m (B,WH) and c_hat (B,WH,C) with matching rows, got {tuple(m.shape)} / {tuple(c_hat.shape)}"
        )
    norms = c_hat.detach().norm(dim=-1)
    if (norms - 1.0).abs().max() > 1e-4:
        raise DomainError("c_hat rows must be unit-norm (max deviation above 1e-4)")
    if stop_content_grad:
        c_hat = c_hat.detach()
    dist = (m.unsqueeze(2) - m.unsqueeze(1)).abs()          # (B, WH, WH)
    sim = torch.bmm(c_hat, c_hat.transpose(1, 2))            # (B, WH, WH)
    return (dist * sim).sum(dim=(1, 2)).mean()


def mask_size_reg(m: torch.Tensor) -> torch.Tensor:
    """L1 norm of the mask per sample, averaged over the batch."""
    if (m.detach().min() < 0) or (m.detach().max() > 1):
        raise DomainError("mask values must lie in [0, 1]")
    return m.reshape(m.shape[0], -1).sum(dim=1).mean()


def adversarial_losses(critic_real: torch.Tensor, critic_fake: torch.Tensor):
    """Wasserstein critic and generator terms.

    Returns (d_term, g_term): d_term = E[fake] - E[real], g_term = -E[fake].
    """
    if not (torch.isfinite(critic_real).all() and torch.isfinite(critic_fake).all()):
        raise NumericError("critic outputs must be finite")
    d_term = critic_fake.mean() - critic_real.mean()
    g_term = -critic_fake.mean()
    return d_term, g_term


def gradient_penalty(
    critic_fn: Callable[[torch.Tensor], torch.Tensor],
    x_real: torch.Tensor,
    x_fake: torch.Tensor,
    generator: torch.Generator | None = None,
) -> torch.Tensor:
    """(||grad_xhat critic(xhat)||_2 - 1)^2 on uniform interpolates."""
    if x_real.shape != x_fake.shape:
        raise DimensionError(f"real/fake shapes differ: {tuple(x_real.shape)} vs {tuple(x_fake.shape)}")
    alpha = torch.rand(x_real.shape[0], 1, 1, 1, dtype=x_real.dtype, generator=generator)
    x_hat = (alpha * x_real + (1.0 - alpha) * x_fake).detach().requires_grad_(True)
    out = critic_fn(x_hat)
    grads = torch.autograd.grad(
        outputs=out,
        inputs=x_hat,
        grad_outputs=torch.ones_like(out),
        create_graph=True,
        retain_graph=True,
    )[0]
    if not torch.isfinite(grads).all():
        raise NumericError("non-finite critic gradients in the penalty term")
    grad_norm = grads.reshape(grads.shape[0], -1).norm(2, dim=1)
    return ((grad_norm - 1.0) ** 2).mean()


def classification_loss(attr_logits: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean per-attribute binary cross-entropy with logits."""
    if attr_logits.shape != target.shape:
        raise DimensionError(f"logits {tuple(attr_logits.shape)} vs target {tuple(target.shape)}")
    return F.binary_cross_entropy_with_logits(attr_logits, target.to(attr_logits.dtype))


def total_generator_loss(terms: Dict[str, torch.Tensor], weights: LossWeights) -> torch.Tensor:
    """Weighted sum of the generator-side terms."""
    missing = [k for k in GENERATOR_TERMS if k not in terms]
    if missing:
        raise ContractError(f"missing generator loss terms: {missing}")
    w = {
        "style_fg": weights.style_fg,
        "style_bg": weights.style_bg,
        "content": weights.content,
        "r1": weights.r1,
        "r2": weights.r2,
        "cycle": weights.cycle,
        "adv_g": weights.adv,
        "cls_g": weights.cls,
    }
    return sum(w[k] * terms[k] for k in GENERATOR_TERMS)


def total_critic_loss(terms: Dict[str, torch.Tensor], weights: LossWeights) -> torch.Tensor:
    """Weighted sum of the critic-side terms."""
    missing = [k for k in CRITIC_TERMS if k not in terms]
    if missing:
        raise ContractError(f"missing critic loss terms: {missing}")
    return weights.adv * terms["adv_d"] + weights.gp * terms["gp"] + weights.cls * terms["cls_d"]
