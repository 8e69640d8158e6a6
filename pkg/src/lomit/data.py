"""Dataset ingestion and the deterministic synthetic two-domain benchmark.

Synthetic samples are soft-edged colored ellipses ("blobs") on textured
neutral backgrounds. The blob color is the domain-defining style (warm
hues for domain A, cool hues for domain B) and the blob support is the
ground-truth mask, so mask quality and local style transfer can be
scored exactly.
"""

from __future__ import annotations

import colorsys
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
import torch
from PIL import Image as PILImage

from .errors import ConfigurationError, DimensionError

ATTRIBUTE_NAMES = ["warm_blob", "cool_blob"]
MANIFEST_NAME = "manifest.tsv"

# Hue bands in degrees; disjoint by construction.
PALETTE_WARM = (0.0, 60.0)
PALETTE_COOL = (190.0, 260.0)


@dataclass(frozen=True)
class SyntheticConfig:
    count: int = 500
    resolution: int = 64
    palette_a: Tuple[float, float] = PALETTE_WARM
    palette_b: Tuple[float, float] = PALETTE_COOL
    seed: int = 0

    def __post_init__(self):
        if self.count < 1:
            raise ConfigurationError("count must be >= 1")
        lo_a, hi_a = self.palette_a
        lo_b, hi_b = self.palette_b
        if max(lo_a, lo_b) < min(hi_a, hi_b):
            raise ConfigurationError(f"palettes overlap: {self.palette_a} vs {self.palette_b}")


@dataclass
class SyntheticSample:
    image: np.ndarray       # (3, H, W) float32 in [-1, 1]
    true_mask: np.ndarray   # (1, H, W) float32, binary
    attributes: np.ndarray  # (A,) uint8 multi-hot
    seed: int


@dataclass
class DatasetManifest:
    root: Path
    entries: List[Tuple[str, np.ndarray]]  # (relative path, label vector)
    attribute_names: List[str]
    domain_attr: int = 0  # attribute whose value 1 defines domain A

    def partition(self) -> Tuple[List[int], List[int]]:
        a = [i for i, (_, lab) in enumerate(self.entries) if lab[self.domain_attr] == 1]
        b = [i for i, (_, lab) in enumerate(self.entries) if lab[self.domain_attr] == 0]
        return a, b


@dataclass
class Dataset:
    """In-memory image dataset split into the two translation domains."""

    images_a: np.ndarray  # (Na, 3, H, W)
    labels_a: np.ndarray  # (Na, A)
    images_b: np.ndarray
    labels_b: np.ndarray
    masks_a: Optional[np.ndarray] = None  # ground truth, when available
    masks_b: Optional[np.ndarray] = None
    attribute_names: List[str] = field(default_factory=lambda: list(ATTRIBUTE_NAMES))

    @property
    def resolution(self) -> int:
        return self.images_a.shape[-1]


def _sample_seed(seed: int, index: int) -> int:
    return (seed * 1_000_003 + index * 7919 + 17) % (2**31 - 1)


def _hsv_to_rgb(h_deg: float, s: float, v: float) -> np.ndarray:
    return np.array(colorsys.hsv_to_rgb((h_deg % 360.0) / 360.0, s, v), dtype=np.float64)


def _render_background(rng: np.random.Generator, res: int) -> np.ndarray:
    """Low-frequency random gradients, a per-image color tint, speckle noise.

    The tint hue is drawn from the full circle (independent of the domain
    palettes) and is strong enough that whole-image color statistics vary
    substantially between images: background style is non-trivial, so
    encoding a style from an unmasked image picks up background color that
    has nothing to do with the domain.
    """
    grid = rng.uniform(0.25, 0.75, size=(3, 4, 4))
    tint = _hsv_to_rgb(rng.uniform(0.0, 360.0), rng.uniform(0.3, 0.7), 1.0).reshape(3, 1, 1)
    strength = rng.uniform(0.15, 0.35)
    low = torch.nn.functional.interpolate(
        torch.from_numpy(grid).unsqueeze(0), size=(res, res), mode="bilinear", align_corners=True
    ).squeeze(0).numpy()
    speckle = rng.uniform(-0.05, 0.05, size=(1, res, res))
    return np.clip((1.0 - strength) * low + strength * tint + speckle, 0.0, 1.0)


def render_sample(sample_seed: int, palette: Tuple[float, float], resolution: int) -> Tuple[np.ndarray, np.ndarray]:
    """Render one blob image and its binary mask, fully determined by the seed."""
    rng = np.random.default_rng(sample_seed)
    res = resolution
    bg = _render_background(rng, res)

    # Ellipse geometry: area fraction bounded so the mask-size regularizer
    # has a meaningful target (blob fraction stays within [0.05, 0.4]).
    area_frac = rng.uniform(0.08, 0.28)
    aspect = rng.uniform(0.6, 1.7)
    a = np.sqrt(area_frac * res * res * aspect / np.pi)
    b = area_frac * res * res / (np.pi * a)
    a = min(a, res * 0.42)
    b = min(b, res * 0.42)
    theta = rng.uniform(0.0, np.pi)
    margin = max(a, b) + 2.0
    cx = rng.uniform(margin, res - margin) if margin < res / 2 else res / 2
    cy = rng.uniform(margin, res - margin) if margin < res / 2 else res / 2

    ys, xs = np.mgrid[0:res, 0:res].astype(np.float64)
    dx, dy = xs - cx + 0.5, ys - cy + 0.5
    xr = dx * np.cos(theta) + dy * np.sin(theta)
    yr = -dx * np.sin(theta) + dy * np.cos(theta)
    d = (xr / a) ** 2 + (yr / b) ** 2
    edge = 0.12
    alpha = np.clip((1.0 - d) / edge, 0.0, 1.0)[None]  # soft rim, 1 inside

    lo, hi = palette
    hue = rng.uniform(lo + 4.0, hi - 4.0)
    color = _hsv_to_rgb(hue, rng.uniform(0.75, 1.0), rng.uniform(0.7, 1.0)).reshape(3, 1, 1)
    shading = 1.0 - 0.12 * np.clip(d, 0.0, 1.0)[None]
    img = bg * (1.0 - alpha) + color * shading * alpha

    mask = (alpha[0] > 0.5).astype(np.float32)[None]
    return (img * 2.0 - 1.0).astype(np.float32), mask


def generate_synthetic(config: SyntheticConfig) -> List[SyntheticSample]:
    """Deterministic two-domain blob dataset; even indices are domain A."""
    samples = []
    for i in range(config.count):
        domain_a = i % 2 == 0
        palette = config.palette_a if domain_a else config.palette_b
        sseed = _sample_seed(config.seed, i)
        img, mask = render_sample(sseed, palette, config.resolution)
        attrs = np.array([1, 0] if domain_a else [0, 1], dtype=np.uint8)
        samples.append(SyntheticSample(image=img, true_mask=mask, attributes=attrs, seed=sseed))
    return samples


def _to_uint8(img: np.ndarray) -> np.ndarray:
    return np.clip((img.transpose(1, 2, 0) + 1.0) * 127.5, 0, 255).round().astype(np.uint8)


def _from_uint8(arr: np.ndarray) -> np.ndarray:
    return (arr.astype(np.float32).transpose(2, 0, 1) / 127.5 - 1.0).astype(np.float32)


def export_synthetic(samples: Sequence[SyntheticSample], out_dir: str | os.PathLike) -> Path:
    """Write PNGs, grayscale mask PNGs, and the manifest."""
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    lines = ["path\t" + ",".join(ATTRIBUTE_NAMES)]
    for i, s in enumerate(samples):
        rel = f"images/{i:05d}.png"
        PILImage.fromarray(_to_uint8(s.image)).save(out / rel)
        mask8 = (s.true_mask[0] * 255).round().astype(np.uint8)
        PILImage.fromarray(mask8, mode="L").save(out / "masks" / f"{i:05d}.png")
        lines.append(f"{rel}\t" + ",".join(str(int(v)) for v in s.attributes))
    (out / MANIFEST_NAME).write_text("\n".join(lines) + "\n")
    return out / MANIFEST_NAME


def load_manifest(path: str | os.PathLike) -> DatasetManifest:
    """Parse a tab-separated manifest; errors name the offending line."""
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"manifest not found: {p}")
    lines = p.read_text().splitlines()
    if not lines:
        raise ConfigurationError(f"{p}: empty manifest")
    header = lines[0].split("\t")
    if len(header) != 2 or not header[1].strip():
        raise ConfigurationError(f"{p}:1: header must be 'path<TAB>attr1,attr2,...'")
    names = [n.strip() for n in header[1].split(",")]
    if not all(names):
        raise ConfigurationError(f"{p}:1: empty attribute name in header")
    entries = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ConfigurationError(f"{p}:{lineno}: expected 'path<TAB>labels', got {line!r}")
        rel, labels_str = parts
        labels = labels_str.split(",")
        if len(labels) != len(names):
            raise ConfigurationError(
                f"{p}:{lineno}: label vector length {len(labels)} != attribute count {len(names)}"
            )
        try:
            lab = np.array([int(v) for v in labels], dtype=np.uint8)
        except ValueError:
            raise ConfigurationError(f"{p}:{lineno}: non-integer label in {labels_str!r}")
        if not np.isin(lab, (0, 1)).all():
            raise ConfigurationError(f"{p}:{lineno}: labels must be 0 or 1")
        if not (p.parent / rel).is_file():
            raise ConfigurationError(f"{p}:{lineno}: missing image file {rel}")
        entries.append((rel, lab))
    manifest = DatasetManifest(root=p.parent, entries=entries, attribute_names=names)
    a, b = manifest.partition()
    if not a or not b:
        raise ConfigurationError(f"{p}: both domain partitions must be non-empty (got {len(a)}/{len(b)})")
    return manifest


def load_dataset(manifest: DatasetManifest, load_masks: bool = True) -> Dataset:
    """Load all manifest images (and ground-truth masks when present)."""
    images, masks = [], []
    have_masks = True
    for rel, _ in manifest.entries:
        arr = np.asarray(PILImage.open(manifest.root / rel).convert("RGB"))
        images.append(_from_uint8(arr))
        mask_path = manifest.root / "masks" / Path(rel).name
        if load_masks and mask_path.is_file():
            m = np.asarray(PILImage.open(mask_path).convert("L")).astype(np.float32) / 255.0
            masks.append(m[None])
        else:
            have_masks = False
    imgs = np.stack(images)
    labels = np.stack([lab for _, lab in manifest.entries])
    idx_a, idx_b = manifest.partition()
    msk = np.stack(masks) if (load_masks and have_masks) else None
    return Dataset(
        images_a=imgs[idx_a],
        labels_a=labels[idx_a],
        images_b=imgs[idx_b],
        labels_b=labels[idx_b],
        masks_a=None if msk is None else msk[idx_a],
        masks_b=None if msk is None else msk[idx_b],
        attribute_names=list(manifest.attribute_names),
    )


def dataset_from_samples(samples: Sequence[SyntheticSample]) -> Dataset:
    idx_a = [i for i, s in enumerate(samples) if s.attributes[0] == 1]
    idx_b = [i for i, s in enumerate(samples) if s.attributes[0] == 0]
    def stack(idx, attr):
        return np.stack([getattr(samples[i], attr) for i in idx])
    return Dataset(
        images_a=stack(idx_a, "image"), labels_a=stack(idx_a, "attributes"),
        images_b=stack(idx_b, "image"), labels_b=stack(idx_b, "attributes"),
        masks_a=stack(idx_a, "true_mask"), masks_b=stack(idx_b, "true_mask"),
    )


@dataclass
class Batch:
    x1: torch.Tensor
    labels1: torch.Tensor
    x2: torch.Tensor
    labels2: torch.Tensor


def epoch_batches(
    dataset: Dataset,
    batch_size: int,
    seed: int,
    epoch: int,
    flip: bool = True,
) -> Iterator[Batch]:
    """Paired (domain A, domain B) batches for one epoch.

    Shuffling is a pure function of (seed, epoch). Each domain-A sample
    appears exactly once per epoch; a trailing partial batch is dropped.
    Horizontal flips are applied identically to image and (implicit) mask
    geometry by flipping the raster.
    """
    if batch_size < 1:
        raise ConfigurationError("batch_size must be >= 1")
    na, nb = len(dataset.images_a), len(dataset.images_b)
    if batch_size > min(na, nb):
        raise ConfigurationError(f"batch_size {batch_size} exceeds domain size {min(na, nb)}")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, epoch)))
    perm_a = rng.permutation(na)
    # Domain B is sampled with replacement-free cycling to cover pairing.
    perm_b = rng.permutation(nb)
    reps = int(np.ceil(na / nb))
    idx_b_full = np.concatenate([perm_b] + [rng.permutation(nb) for _ in range(reps - 1)])[:na]
    for start in range(0, na - batch_size + 1, batch_size):
        ia = perm_a[start : start + batch_size]
        ib = idx_b_full[start : start + batch_size]
        x1 = dataset.images_a[ia].copy()
        x2 = dataset.images_b[ib].copy()
        if flip:
            flips1 = rng.random(batch_size) < 0.5
            flips2 = rng.random(batch_size) < 0.5
            x1[flips1] = x1[flips1, :, :, ::-1]
            x2[flips2] = x2[flips2, :, :, ::-1]
        yield Batch(
            x1=torch.from_numpy(np.ascontiguousarray(x1)),
            labels1=torch.from_numpy(dataset.labels_a[ia].astype(np.float32)),
            x2=torch.from_numpy(np.ascontiguousarray(x2)),
            labels2=torch.from_numpy(dataset.labels_b[ib].astype(np.float32)),
        )


def flip_pair(image: np.ndarray, mask: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Horizontal flip applied identically to an image and its mask."""
    if image.shape[-2:] != mask.shape[-2:]:
        raise DimensionError("image and mask spatial dims differ")
    return image[..., ::-1].copy(), mask[..., ::-1].copy()
