"""Bidirectional training loop, optimization, checkpointing, and logging.

Checkpoints use a self-describing binary container (JSON header plus raw
little-endian arrays) so that save -> load -> save is byte-identical and
a content digest can guard against corruption.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field, asdict, replace
from pathlib import Path
from typing import Dict, Iterator, Optional, Tuple

import numpy as np
import torch
import yaml

from . import data as data_mod
from . import objectives as obj
from .errors import CheckpointError, ConfigurationError, NumericError
from .hadain import downsample_mask, split_by_mask
from .networks import LOMITModel, NetConfig

CHECKPOINT_MAGIC = b"LOMITCK1"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    resolution: int = 64
    batch_size: int = 8
    iterations: int = 20000
    lr_g: float = 1e-4
    lr_d: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    weights: obj.LossWeights = field(default_factory=obj.LossWeights)
    style_dim: int = 8
    num_attrs: int = 2
    base_channels: int = 8
    seed: int = 0
    checkpoint_interval: int = 1000
    lomit_minus_minus: bool = False
    self_reconstruction: bool = False
    flip_augment: bool = True
    # exactly one of the two dataset sources is set
    manifest_path: Optional[str] = None
    synthetic: Optional[data_mod.SyntheticConfig] = None

    def __post_init__(self):
        if self.resolution <= 0 or self.batch_size <= 0 or self.iterations < 0:
            raise ConfigurationError("resolution/batch_size must be positive, iterations >= 0")
        if self.lr_g <= 0 or self.lr_d <= 0 or self.checkpoint_interval <= 0:
            raise ConfigurationError("learning rates and checkpoint_interval must be positive")

    def net_config(self) -> NetConfig:
        return NetConfig(
            resolution=self.resolution,
            base_channels=self.base_channels,
            style_dim=self.style_dim,
            num_attrs=self.num_attrs,
        )

    def to_dict(self) -> Dict:
        d = asdict(self)
        if self.synthetic is not None:
            d["synthetic"] = asdict(self.synthetic)
            d["synthetic"]["palette_a"] = list(self.synthetic.palette_a)
            d["synthetic"]["palette_b"] = list(self.synthetic.palette_b)
        return d

    @classmethod
    def from_dict(cls, d: Dict) -> "TrainConfig":
        d = dict(d)
        if d.get("weights") is not None:
            d["weights"] = obj.LossWeights(**d["weights"])
        if d.get("synthetic") is not None:
            s = dict(d["synthetic"])
            for key in ("palette_a", "palette_b"):
                if key in s:
                    s[key] = tuple(s[key])
            d["synthetic"] = data_mod.SyntheticConfig(**s)
        return cls(**d)


def load_train_config(path: str | Path) -> TrainConfig:
    with open(path) as f:
        raw = yaml.safe_load(f)
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path}: config must be a mapping")
    try:
        return TrainConfig.from_dict(raw)
    except TypeError as e:
        raise ConfigurationError(f"{path}: {e}") from e


def load_training_dataset(cfg: TrainConfig) -> data_mod.Dataset:
    if (cfg.manifest_path is None) == (cfg.synthetic is None):
        raise ConfigurationError("exactly one of manifest_path or synthetic must be set")
    if cfg.synthetic is not None:
        return data_mod.dataset_from_samples(data_mod.generate_synthetic(cfg.synthetic))
    return data_mod.load_dataset(data_mod.load_manifest(cfg.manifest_path))


# ---------------------------------------------------------------------------
# One training step
# ---------------------------------------------------------------------------


def _normalize_rows(c: torch.Tensor) -> torch.Tensor:
    """Flatten a content map to (B, WH, C) with unit-norm rows."""
    c_flat = c.flatten(2).transpose(1, 2)
    return c_flat / c_flat.norm(dim=-1, keepdim=True).clamp_min(1e-12)


def _mask_regularizers(masks_full, masks_lo, contents) -> Tuple[torch.Tensor, torch.Tensor]:
    r1 = sum(
        obj.mask_content_consistency_reg(m_lo.flatten(1), _normalize_rows(c), stop_content_grad=True)
        for m_lo, c in zip(masks_lo, contents)
    ) / len(contents)
    r2 = sum(obj.mask_size_reg(m) for m in masks_full) / len(masks_full)
    return r1, r2


def train_step(
    model: LOMITModel,
    opt_g: torch.optim.Optimizer,
    opt_d: torch.optim.Optimizer,
    batch: data_mod.Batch,
    cfg: TrainConfig,
) -> obj.LossReport:
    """Critic update followed by a generator update on one paired batch.

    Both translation directions run through each sub-network as a single
    batched call; the math is identical to two independent passes because
    every normalization here is per-sample.
    """
    w = cfg.weights
    x1, x2 = batch.x1, batch.x2
    n = x1.shape[0]

    # --- shared encodings and both translations ----------------------------
    c = model.e_c(torch.cat([x1, x2]))
    c1, c2 = c[:n], c[n:]
    m = model.g_m(c)
    m1, m2 = m[:n], m[n:]
    if cfg.lomit_minus_minus:
        # Style comes from whole images; the masks still gate the blend.
        s = model.e_s(torch.cat([x1, x2]))
        s1_f = s1_b = s[:n]
        s2_f = s2_b = s[n:]
    else:
        x1_f, x1_b = split_by_mask(x1, m1)
        x2_f, x2_b = split_by_mask(x2, m2)
        s = model.e_s(
            torch.cat([x1_f, x1_b, x2_f, x2_b]),
            torch.cat([m1, 1.0 - m1, m2, 1.0 - m2]),
        )
        s1_f, s1_b, s2_f, s2_b = s[:n], s[n : 2 * n], s[2 * n : 3 * n], s[3 * n :]

    target = (c1.shape[2], c1.shape[3])
    m_lo = downsample_mask(m, target)
    m1_lo, m2_lo = m_lo[:n], m_lo[n:]
    h12 = model.hadain_blend(m1_lo, c1, s2_f, s1_b)
    h21 = model.hadain_blend(m2_lo, c2, s1_f, s2_b)
    x_t = m * model.g(torch.cat([h12, h21])) + (1.0 - m) * torch.cat([x1, x2])
    x12, x21 = x_t[:n], x_t[n:]

    # --- translated-side encodings and cycles -------------------------------
    c_t = model.e_c(x_t)
    c12, c21 = c_t[:n], c_t[n:]
    m_t = model.g_m(c_t)
    m12, m21 = m_t[:n], m_t[n:]
    if cfg.lomit_minus_minus:
        s_t = model.e_s(x_t)
        s12_f = s12_b = s_t[:n]
        s21_f = s21_b = s_t[n:]
    else:
        x12_f, x12_b = split_by_mask(x12, m12)
        x21_f, x21_b = split_by_mask(x21, m21)
        s_t = model.e_s(
            torch.cat([x12_f, x12_b, x21_f, x21_b]),
            torch.cat([m12, 1.0 - m12, m21, 1.0 - m21]),
        )
        s12_f, s12_b, s21_f, s21_b = s_t[:n], s_t[n : 2 * n], s_t[2 * n : 3 * n], s_t[3 * n :]

    m_t_lo = downsample_mask(m_t, target)
    h121 = model.hadain_blend(m_t_lo[:n], c12, s1_f, s12_b)
    h212 = model.hadain_blend(m_t_lo[n:], c21, s2_f, s21_b)
    x_cyc = m_t * model.g(torch.cat([h121, h212])) + (1.0 - m_t) * x_t

    # --- critic update -----------------------------------------------------
    opt_d.zero_grad(set_to_none=True)
    real, logits_real = model.criticize(torch.cat([x1, x2]))
    fake, _ = model.criticize(x_t.detach())
    adv_d, _ = obj.adversarial_losses(real, fake)
    critic_fn = lambda t: model.criticize(t)[0]
    gp = obj.gradient_penalty(critic_fn, torch.cat([x2, x1]), x_t.detach())
    cls_d = obj.classification_loss(logits_real, torch.cat([batch.labels1, batch.labels2]))
    critic_terms = {"adv_d": adv_d, "gp": gp, "cls_d": cls_d}
    total_d = obj.total_critic_loss(critic_terms, w)
    total_d.backward()
    opt_d.step()

    # --- generator update --------------------------------------------------
    opt_g.zero_grad(set_to_none=True)
    fresh, logits_fake = model.criticize(x_t)  # after the critic update
    _, adv_g = obj.adversarial_losses(fresh.detach(), fresh)
    gen_terms = {
        "style_fg": 0.5 * (obj.style_recon_loss(s12_f, s2_f) + obj.style_recon_loss(s21_f, s1_f)),
        "style_bg": 0.5 * (obj.style_recon_loss(s12_b, s1_b) + obj.style_recon_loss(s21_b, s2_b)),
        "content": 0.5 * (obj.content_recon_loss(c12, c1) + obj.content_recon_loss(c21, c2)),
        "cycle": obj.cycle_loss(x_cyc, torch.cat([x1, x2])),
        "adv_g": adv_g,
        "cls_g": obj.classification_loss(logits_fake, torch.cat([batch.labels2, batch.labels1])),
    }
    r1, r2 = _mask_regularizers((m1, m2), (m1_lo, m2_lo), (c1, c2))
    gen_terms["r1"] = r1
    gen_terms["r2"] = r2
    if cfg.self_reconstruction:
        h_self = torch.cat(
            [model.hadain_blend(m1_lo, c1, s1_f, s1_b), model.hadain_blend(m2_lo, c2, s2_f, s2_b)]
        )
        x_self = m * model.g(h_self) + (1.0 - m) * torch.cat([x1, x2])
        gen_terms["cycle"] = gen_terms["cycle"] + obj.cycle_loss(x_self, torch.cat([x1, x2]))
    total_g = obj.total_generator_loss(gen_terms, w)
    total_g.backward()
    opt_g.step()

    report = obj.LossReport(
        terms={k: float(v.detach()) for k, v in {**gen_terms, **critic_terms}.items()},
        total_g=float(total_g.detach()),
        total_d=float(total_d.detach()),
    )
    for name, value in report.to_dict().items():
        if not np.isfinite(value):
            raise NumericError(f"non-finite loss term {name!r} at training step")
    return report


# ---------------------------------------------------------------------------
# Checkpoint container
# ---------------------------------------------------------------------------


def _collect_arrays(model: LOMITModel, opt_g, opt_d) -> Tuple[Dict[str, np.ndarray], Dict]:
    arrays: Dict[str, np.ndarray] = {}
    for name, tensor in model.state_dict().items():
        arrays[f"model.{name}"] = tensor.detach().cpu().numpy()
    scalars: Dict = {"opt": {}}
    for prefix, opt in (("opt_g", opt_g), ("opt_d", opt_d)):
        sd = opt.state_dict()
        groups = []
        for g in sd["param_groups"]:
            g = dict(g)
            g["betas"] = list(g["betas"])
            groups.append(g)
        scalars["opt"][prefix] = {"param_groups": groups, "state_keys": {}}
        for idx, state in sd["state"].items():
            keys = []
            for key, val in state.items():
                if isinstance(val, torch.Tensor):
                    arrays[f"{prefix}.state.{idx}.{key}"] = val.detach().cpu().numpy()
                    keys.append(key)
                else:
                    scalars["opt"][prefix].setdefault("plain_state", {}).setdefault(str(idx), {})[key] = val
            scalars["opt"][prefix]["state_keys"][str(idx)] = keys
    arrays["torch_rng"] = torch.get_rng_state().numpy()
    return arrays, scalars


def save_checkpoint(
    path: str | Path,
    model: LOMITModel,
    opt_g,
    opt_d,
    iteration: int,
    cfg: TrainConfig,
) -> None:
    arrays, scalars = _collect_arrays(model, opt_g, opt_d)
    names = sorted(arrays)
    blobs, manifest, offset = [], [], 0
    for name in names:
        arr = np.ascontiguousarray(arrays[name])
        raw = arr.tobytes()
        manifest.append(
            {"name": name, "dtype": str(arr.dtype), "shape": list(arr.shape), "offset": offset, "nbytes": len(raw)}
        )
        blobs.append(raw)
        offset += len(raw)
    data = b"".join(blobs)
    header = {
        "format_version": CHECKPOINT_VERSION,
        "iteration": iteration,
        "config": cfg.to_dict(),
        "arrays": manifest,
        "scalars": scalars,
        "data_digest": hashlib.sha256(data).hexdigest(),
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(len(header_bytes).to_bytes(8, "little"))
        f.write(header_bytes)
        f.write(data)


@dataclass
class TrainState:
    model: LOMITModel
    opt_g: torch.optim.Optimizer
    opt_d: torch.optim.Optimizer
    iteration: int
    config: TrainConfig


def _read_checkpoint(path: str | Path) -> Tuple[Dict, Dict[str, np.ndarray]]:
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {p}: {e}") from e
    if len(raw) < 16 or raw[:8] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{p}: not a checkpoint file (bad magic)")
    header_len = int.from_bytes(raw[8:16], "little")
    if len(raw) < 16 + header_len:
        raise CheckpointError(f"{p}: truncated header")
    try:
        header = json.loads(raw[16 : 16 + header_len])
    except json.JSONDecodeError as e:
        raise CheckpointError(f"{p}: corrupt header: {e}") from e
    if header.get("format_version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{p}: incompatible checkpoint format version {header.get('format_version')} "
            f"(expected {CHECKPOINT_VERSION})"
        )
    data = raw[16 + header_len :]
    expected = sum(a["nbytes"] for a in header["arrays"])
    if len(data) != expected:
        raise CheckpointError(f"{p}: truncated data section ({len(data)} of {expected} bytes)")
    if hashlib.sha256(data).hexdigest() != header["data_digest"]:
        raise CheckpointError(f"{p}: content digest mismatch (corrupt checkpoint)")
    arrays = {}
    for a in header["arrays"]:
        buf = data[a["offset"] : a["offset"] + a["nbytes"]]
        arrays[a["name"]] = np.frombuffer(buf, dtype=np.dtype(a["dtype"])).reshape(a["shape"]).copy()
    return header, arrays


def _make_optimizers(model: LOMITModel, cfg: TrainConfig):
    opt_g = torch.optim.Adam(model.generator_parameters(), lr=cfg.lr_g, betas=(cfg.beta1, cfg.beta2))
    opt_d = torch.optim.Adam(model.d.parameters(), lr=cfg.lr_d, betas=(cfg.beta1, cfg.beta2))
    return opt_g, opt_d


def load_checkpoint(path: str | Path, restore_rng: bool = False) -> TrainState:
    header, arrays = _read_checkpoint(path)
    cfg = TrainConfig.from_dict(header["config"])
    model = LOMITModel(cfg.net_config())
    model.load_state_dict(
        {k[len("model."):]: torch.from_numpy(v) for k, v in arrays.items() if k.startswith("model.")}
    )
    opt_g, opt_d = _make_optimizers(model, cfg)
    for prefix, opt in (("opt_g", opt_g), ("opt_d", opt_d)):
        meta = header["scalars"]["opt"][prefix]
        state = {}
        for idx_str, keys in meta["state_keys"].items():
            idx = int(idx_str)
            entry = {k: torch.from_numpy(arrays[f"{prefix}.state.{idx}.{k}"]) for k in keys}
            entry.update(meta.get("plain_state", {}).get(idx_str, {}))
            state[idx] = entry
        groups = []
        for g in meta["param_groups"]:
            g = dict(g)
            g["betas"] = tuple(g["betas"])
            groups.append(g)
        if state:
            opt.load_state_dict({"state": state, "param_groups": groups})
    if restore_rng:
        torch.set_rng_state(torch.from_numpy(arrays["torch_rng"]))
    return TrainState(model=model, opt_g=opt_g, opt_d=opt_d, iteration=header["iteration"], config=cfg)


def load_model(path: str | Path) -> Tuple[LOMITModel, TrainConfig]:
    """Inference-only load: frozen model in eval mode plus its config."""
    state = load_checkpoint(path)
    state.model.eval()
    for p in state.model.parameters():
        p.requires_grad_(False)
    return state.model, state.config


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


def _assert_finite_params(model: LOMITModel, iteration: int) -> None:
    for name, p in model.named_parameters():
        if not torch.isfinite(p).all():
            raise NumericError(f"non-finite parameter {name!r} at iteration {iteration}")


def _batch_stream(dataset: data_mod.Dataset, cfg: TrainConfig, start_iteration: int) -> Iterator[data_mod.Batch]:
    """Endless deterministic batch stream, positioned at start_iteration."""
    per_epoch = len(dataset.images_a) // cfg.batch_size
    if per_epoch == 0:
        raise ConfigurationError("batch_size exceeds domain-A size")
    it = start_iteration
    while True:
        epoch = it // per_epoch
        skip = it % per_epoch
        for i, batch in enumerate(
            data_mod.epoch_batches(dataset, cfg.batch_size, cfg.seed, epoch, flip=cfg.flip_augment)
        ):
            if i < skip:
                continue
            yield batch
            it += 1


def train(
    cfg: TrainConfig,
    out_dir: str | Path,
    resume_from: Optional[str | Path] = None,
    log_every: int = 1,
    progress: bool = False,
) -> Path:
    """Run the training loop; returns the path of the final checkpoint."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("ok")
        probe.unlink()
    except OSError as e:
        raise ConfigurationError(f"checkpoint directory {out} is not writable: {e}") from e

    dataset = load_training_dataset(cfg)
    if resume_from is not None:
        state = load_checkpoint(resume_from, restore_rng=True)
        if state.config != cfg:
            raise ConfigurationError("resume checkpoint was trained with a different config")
        model, opt_g, opt_d = state.model, state.opt_g, state.opt_d
        start = state.iteration
    else:
        torch.manual_seed(cfg.seed)
        model = LOMITModel(cfg.net_config())
        opt_g, opt_d = _make_optimizers(model, cfg)
        start = 0

    (out / "config.yaml").write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=True))
    final_path = out / "checkpoint_final.ckpt"
    if cfg.iterations == 0 or start >= cfg.iterations:
        save_checkpoint(final_path, model, opt_g, opt_d, start, cfg)
        return final_path

    stream = _batch_stream(dataset, cfg, start)
    log_path = out / "log.ndjson"
    t0 = time.time()
    with open(log_path, "a") as log:
        for it in range(start, cfg.iterations):
            batch = next(stream)
            try:
                report = train_step(model, opt_g, opt_d, batch, cfg)
            except NumericError as e:
                raise NumericError(f"aborting at iteration {it}: {e}") from e
            if (it + 1) % log_every == 0:
                record = {"iteration": it + 1, "losses": report.to_dict(), "wall_time": time.time() - t0}
                log.write(json.dumps(record) + "\n")
            if (it + 1) % cfg.checkpoint_interval == 0 or it + 1 == cfg.iterations:
                _assert_finite_params(model, it + 1)
                save_checkpoint(out / f"checkpoint_{it + 1:07d}.ckpt", model, opt_g, opt_d, it + 1, cfg)
                log.flush()
                if progress:
                    print(
                        f"iter {it + 1}/{cfg.iterations} "
                        f"g={report.total_g:.4f} d={report.total_d:.4f} "
                        f"cycle={report.terms['cycle']:.4f} "
                        f"({(time.time() - t0) / (it + 1 - start):.2f}s/it)",
                        flush=True,
                    )
    save_checkpoint(final_path, model, opt_g, opt_d, cfg.iterations, cfg)
    return final_path
