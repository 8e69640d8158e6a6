"""Trainable sub-networks and the composed translation forward pass.

Small MUNIT-style reference stack: a shared content encoder, a shared
style encoder applied to masked regions, an attention head that turns
content features into a full-resolution soft mask, a decoder fed by the
highway-AdaIN blend, two affine-parameter MLPs (foreground/background),
and a Wasserstein critic with an auxiliary attribute classifier.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Dict, Optional

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import DimensionError, DomainError
from .hadain import AffineParams, adain, downsample_mask, hadain, split_by_mask


@dataclass(frozen=True)
class NetConfig:
    """Architecture hyperparameters, immutable after construction."""

    resolution: int = 64
    base_channels: int = 8
    style_dim: int = 8
    num_attrs: int = 2
    downsample: int = 4  # content code at resolution / downsample

    @property
    def content_channels(self) -> int:
        return self.base_channels * 4

    @property
    def content_size(self) -> int:
        return self.resolution // self.downsample

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Dict) -> "NetConfig":
        return cls(**d)


class ResBlock(nn.Module):
    def __init__(self, channels: int, norm: bool = True):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1)
        self.norm = norm

    def forward(self, x):
        y = self.conv1(x)
        if self.norm:
            y = F.instance_norm(y)
        y = F.relu(y)
        y = self.conv2(y)
        if self.norm:
            y = F.instance_norm(y)
        return x + y


def _upsample_conv(cin: int, cout: int) -> nn.Module:
    return nn.Sequential(
        nn.Upsample(scale_factor=2, mode="nearest"),
        nn.Conv2d(cin, cout, 3, padding=1),
    )


class ContentEncoder(nn.Module):
    """Two stride-2 downsampling convolutions plus two residual blocks."""

    def __init__(self, cfg: NetConfig):
        super().__init__()
        c = cfg.base_channels
        self.stem = nn.Conv2d(3, c, 3, padding=1)
        self.down1 = nn.Conv2d(c, 2 * c, 4, stride=2, padding=1)
        self.down2 = nn.Conv2d(2 * c, 4 * c, 4, stride=2, padding=1)
        self.res1 = ResBlock(4 * c)
        self.res2 = ResBlock(4 * c)

    def forward(self, x):
        y = F.relu(F.instance_norm(self.stem(x)))
        y = F.relu(F.instance_norm(self.down1(y)))
        y = F.relu(F.instance_norm(self.down2(y)))
        return self.res2(self.res1(y))


class StyleEncoder(nn.Module):
    """Four stride-2 convolutions, mask-weighted average pool, linear head.

    When a mask is given, pooling is normalized by the (downsampled) mask
    mass, so the style code describes the region's appearance independent
    of its area. Plain global average pooling would scale the code with
    region size and systematically starve small-region styles.
    """

    def __init__(self, cfg: NetConfig):
        super().__init__()
        c = cfg.base_channels
        self.convs = nn.Sequential(
            nn.Conv2d(3, c, 4, stride=2, padding=1), nn.ReLU(),
            nn.Conv2d(c, 2 * c, 4, stride=2, padding=1), nn.ReLU(),
            nn.Conv2d(2 * c, 4 * c, 4, stride=2, padding=1), nn.ReLU(),
            nn.Conv2d(4 * c, 8 * c, 4, stride=2, padding=1), nn.ReLU(),
        )
        self.head = nn.Linear(8 * c, cfg.style_dim)

    def forward(self, x, m=None):
        y = self.convs(x)
        if m is None:
            y = y.mean(dim=(2, 3))
        else:
            m_lo = downsample_mask(m, (y.shape[2], y.shape[3]))
            y = (y * m_lo).sum(dim=(2, 3)) / (m_lo.sum(dim=(2, 3)) + 1e-8)
        return self.head(y)


class MaskHead(nn.Module):
    """Attention tail: content features to a full-resolution sigmoid mask."""

    def __init__(self, cfg: NetConfig):
        super().__init__()
        cc = cfg.content_channels
        self.res1 = ResBlock(cc)
        self.res2 = ResBlock(cc)
        self.up1 = _upsample_conv(cc, cc // 2)
        self.up2 = _upsample_conv(cc // 2, cc // 4)
        self.head = nn.Conv2d(cc // 4, 1, 3, padding=1)
        # Start near an all-foreground mask. The blend is symmetric under
        # m -> 1 - m with the two style branches swapped, so the size
        # regularizer is the only pressure that picks an orientation; it can
        # only prune, not flip, an established mask. Biasing the logits
        # positive makes pruning land on the foreground-aligned solution.
        nn.init.constant_(self.head.bias, 2.0)

    def forward(self, c):
        y = self.res2(self.res1(c))
        y = F.relu(F.instance_norm(self.up1(y)))
        y = F.relu(F.instance_norm(self.up2(y)))
        return torch.sigmoid(self.head(y))


class Decoder(nn.Module):
    """Two residual blocks and two upsampling blocks, tanh output."""

    def __init__(self, cfg: NetConfig):
        super().__init__()
        cc = cfg.content_channels
        self.res1 = ResBlock(cc)
        self.res2 = ResBlock(cc)
        self.up1 = _upsample_conv(cc, cc // 2)
        self.up2 = _upsample_conv(cc // 2, cc // 4)
        self.head = nn.Conv2d(cc // 4, 3, 3, padding=1)

    def forward(self, h):
        y = self.res2(self.res1(h))
        y = F.relu(F.instance_norm(self.up1(y)))
        y = F.relu(F.instance_norm(self.up2(y)))
        return torch.tanh(self.head(y))


class AffineHead(nn.Module):
    """MLP mapping a style code to per-channel (gamma, beta).

    gamma is parameterized as 1 + residual so a freshly initialized head
    starts near the identity transform.
    """

    def __init__(self, cfg: NetConfig):
        super().__init__()
        cc = cfg.content_channels
        self.net = nn.Sequential(
            nn.Linear(cfg.style_dim, 8 * cfg.base_channels),
            nn.ReLU(),
            nn.Linear(8 * cfg.base_channels, 2 * cc),
        )
        self.cc = cc

    def forward(self, s) -> AffineParams:
        out = self.net(s)
        beta, gamma_res = out[:, : self.cc], out[:, self.cc :]
        return AffineParams(gamma=1.0 + gamma_res, beta=beta)


class Critic(nn.Module):
    """Four stride-2 convolutions with a realness head and attribute logits."""

    def __init__(self, cfg: NetConfig):
        super().__init__()
        c = cfg.base_channels
        self.convs = nn.Sequential(
            nn.Conv2d(3, c, 4, stride=2, padding=1), nn.LeakyReLU(0.2),
            nn.Conv2d(c, 2 * c, 4, stride=2, padding=1), nn.LeakyReLU(0.2),
            nn.Conv2d(2 * c, 4 * c, 4, stride=2, padding=1), nn.LeakyReLU(0.2),
            nn.Conv2d(4 * c, 8 * c, 4, stride=2, padding=1), nn.LeakyReLU(0.2),
        )
        feat = 8 * c * (cfg.resolution // 16) ** 2
        self.realness = nn.Linear(feat, 1)
        self.classifier = nn.Linear(feat, cfg.num_attrs)

    def forward(self, x):
        y = self.convs(x).flatten(1)
        return self.realness(y).squeeze(1), self.classifier(y)


@dataclass
class TranslationResult:
    output: torch.Tensor
    input_mask: torch.Tensor
    exemplar_mask: torch.Tensor
    intermediates: Dict[str, torch.Tensor] = field(default_factory=dict)


class LOMITModel(nn.Module):
    """Bundle of all sub-networks plus the composed translation pass."""

    def __init__(self, cfg: NetConfig):
        super().__init__()
        self.cfg = cfg
        self.e_c = ContentEncoder(cfg)
        self.e_s = StyleEncoder(cfg)
        self.g_m = MaskHead(cfg)
        self.g = Decoder(cfg)
        self.mlp_f = AffineHead(cfg)
        self.mlp_b = AffineHead(cfg)
        self.d = Critic(cfg)

    def generator_parameters(self):
        for module in (self.e_c, self.e_s, self.g_m, self.g, self.mlp_f, self.mlp_b):
            yield from module.parameters()

    def _check_image(self, x: torch.Tensor) -> None:
        if x.dim() != 4 or x.shape[1] != 3:
            raise DimensionError(f"expected image (B,3,H,W), got {tuple(x.shape)}")
        if x.shape[2] % self.cfg.downsample or x.shape[3] % self.cfg.downsample:
            raise DimensionError(
                f"resolution {tuple(x.shape[2:])} not divisible by downsampling factor {self.cfg.downsample}"
            )

    def encode_content(self, x: torch.Tensor) -> torch.Tensor:
        self._check_image(x)
        return self.e_c(x)

    def encode_style(self, x_region: torch.Tensor) -> torch.Tensor:
        self._check_image(x_region)
        return self.e_s(x_region)

    def extract_mask(self, x: torch.Tensor) -> torch.Tensor:
        return self.g_m(self.encode_content(x))

    def affine_heads(self, s_f: torch.Tensor, s_b: torch.Tensor):
        if s_f.shape[-1] != self.cfg.style_dim or s_b.shape[-1] != self.cfg.style_dim:
            raise DimensionError(
                f"style codes must have length {self.cfg.style_dim}, got {s_f.shape[-1]}/{s_b.shape[-1]}"
            )
        return self.mlp_f(s_f), self.mlp_b(s_b)

    def hadain_blend(
        self, m_lo: torch.Tensor, c: torch.Tensor, s_fg: torch.Tensor, s_bg: torch.Tensor
    ) -> torch.Tensor:
        """Affine heads plus the highway blend at content resolution."""
        fg_params, bg_params = self.affine_heads(s_fg, s_bg)
        return hadain(m_lo, c, fg_params, bg_params)

    def decode(self, h: torch.Tensor) -> torch.Tensor:
        if h.dim() != 4 or h.shape[1] != self.cfg.content_channels:
            raise DimensionError(
                f"expected content code (B,{self.cfg.content_channels},Hc,Wc), got {tuple(h.shape)}"
            )
        return self.g(h)

    def criticize(self, x: torch.Tensor):
        self._check_image(x)
        return self.d(x)

    def _resolve_mask(self, x: torch.Tensor, override: Optional[torch.Tensor], c: torch.Tensor):
        if override is None:
            return self.g_m(c)
        if override.shape != (x.shape[0], 1, x.shape[2], x.shape[3]):
            raise DimensionError(
                f"mask override {tuple(override.shape)} does not match image {tuple(x.shape)}"
            )
        if override.min() < 0 or override.max() > 1:
            raise DomainError("mask override values must lie in [0, 1]")
        return override

    def translate(
        self,
        x1: torch.Tensor,
        x2: torch.Tensor,
        m1_override: Optional[torch.Tensor] = None,
        m2_override: Optional[torch.Tensor] = None,
        use_exemplar_mask: bool = True,
    ) -> TranslationResult:
        """Translate x1 toward the style of exemplar x2.

        With use_exemplar_mask disabled, style codes are extracted from
        the whole exemplar (foreground) and the whole input (background);
        the input mask still gates the highway blend.
        """
        self._check_image(x1)
        self._check_image(x2)
        if x1.shape != x2.shape:
            raise DimensionError(f"input {tuple(x1.shape)} and exemplar {tuple(x2.shape)} shapes differ")

        c1 = self.e_c(x1)
        c2 = self.e_c(x2)
        m1 = self._resolve_mask(x1, m1_override, c1)
        m2 = self._resolve_mask(x2, m2_override, c2)

        if use_exemplar_mask:
            x2_fg, _ = split_by_mask(x2, m2)
            _, x1_bg = split_by_mask(x1, m1)
            s2_f = self.e_s(x2_fg, m2)
            s1_b = self.e_s(x1_bg, 1.0 - m1)
        else:
            s2_f = self.e_s(x2)
            s1_b = self.e_s(x1)

        fg_params, bg_params = self.affine_heads(s2_f, s1_b)
        m1_lo = downsample_mask(m1, (c1.shape[2], c1.shape[3]))
        h = hadain(m1_lo, c1, fg_params, bg_params)
        # Image-space highway: outside the mask the input is kept verbatim,
        # so the translated region is exactly the masked one. This makes the
        # mask task-relevant — a misplaced mask cannot restyle the target
        # region at all — instead of a hint the decoder may ignore.
        out = m1 * self.g(h) + (1.0 - m1) * x1

        return TranslationResult(
            output=out,
            input_mask=m1,
            exemplar_mask=m2,
            intermediates={
                "c1": c1,
                "c2": c2,
                "s2_f": s2_f,
                "s1_b": s1_b,
                "h": h,
                "m1_lo": m1_lo,
                "adain_fg": adain(c1, fg_params),
                "adain_bg": adain(c1, bg_params),
            },
        )
