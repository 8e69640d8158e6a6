"""HTTP service exposing mask extraction and mask-overridable translation.

Wire format: JSON bodies with base64-encoded PNGs (8-bit RGB images,
8-bit grayscale masks where 255 maps to weight 1.0). Uploaded images are
bilinearly resized to the checkpoint resolution (noted in the
``X-Input-Resized`` response header); mask overrides are never resized.
"""

from __future__ import annotations

import base64
import io
import time
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np
import torch
from fastapi import FastAPI, HTTPException, Response
from fastapi.staticfiles import StaticFiles
from PIL import Image as PILImage
from pydantic import BaseModel

from . import __version__
from .networks import LOMITModel
from .training import TrainConfig, load_model

DEFAULT_CHECKPOINT_ID = "default"


class TranslateRequest(BaseModel):
    input_image: str
    exemplar_image: str
    input_mask_override: Optional[str] = None
    exemplar_mask_override: Optional[str] = None
    checkpoint_id: str = DEFAULT_CHECKPOINT_ID


class MasksRequest(BaseModel):
    input_image: str
    exemplar_image: str
    checkpoint_id: str = DEFAULT_CHECKPOINT_ID


def _decode_png(b64: str, mode: str) -> np.ndarray:
    try:
        raw = base64.b64decode(b64, validate=True)
        img = PILImage.open(io.BytesIO(raw))
        img.load()
    except Exception:
        raise HTTPException(status_code=400, detail="undecodable image payload")
    return np.asarray(img.convert(mode))


def _encode_png(arr: np.ndarray, mode: str) -> str:
    img = PILImage.fromarray(arr, mode=mode)
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode()


def image_to_tensor(arr: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(arr.astype(np.float32).transpose(2, 0, 1) / 127.5 - 1.0).unsqueeze(0)


def tensor_to_image(t: torch.Tensor) -> np.ndarray:
    arr = t.squeeze(0).numpy()
    return np.clip((arr.transpose(1, 2, 0) + 1.0) * 127.5, 0, 255).round().astype(np.uint8)


def mask_to_tensor(arr: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(arr.astype(np.float32) / 255.0).unsqueeze(0).unsqueeze(0)


def tensor_to_mask(t: torch.Tensor) -> np.ndarray:
    return np.clip(t.squeeze(0).squeeze(0).numpy() * 255.0, 0, 255).round().astype(np.uint8)


class ModelRegistry:
    def __init__(self, checkpoints: Dict[str, Tuple[LOMITModel, TrainConfig]]):
        if not checkpoints:
            raise ValueError("at least one checkpoint is required")
        self.checkpoints = checkpoints

    def get(self, checkpoint_id: str) -> Tuple[LOMITModel, TrainConfig]:
        if checkpoint_id not in self.checkpoints:
            raise HTTPException(status_code=404, detail=f"unknown checkpoint_id {checkpoint_id!r}")
        return self.checkpoints[checkpoint_id]


def _prepare_image(b64: str, resolution: int) -> Tuple[torch.Tensor, bool]:
    arr = _decode_png(b64, "RGB")
    resized = arr.shape[:2] != (resolution, resolution)
    if resized:
        img = PILImage.fromarray(arr).resize((resolution, resolution), PILImage.BILINEAR)
        arr = np.asarray(img)
    return image_to_tensor(arr), resized


def _prepare_mask(b64: Optional[str], resolution: int) -> Optional[torch.Tensor]:
    if b64 is None:
        return None
    arr = _decode_png(b64, "L")
    if arr.shape != (resolution, resolution):
        raise HTTPException(
            status_code=422,
            detail=f"mask override is {arr.shape[::-1]}, expected {(resolution, resolution)}; "
            "masks are never resized",
        )
    return mask_to_tensor(arr)


def create_app(checkpoints: Dict[str, str | Path], static_dir: Optional[str | Path] = None) -> FastAPI:
    """Build the service over frozen model snapshots.

    checkpoints maps checkpoint ids to checkpoint file paths.
    """
    registry = ModelRegistry({cid: load_model(p) for cid, p in checkpoints.items()})
    app = FastAPI(title="lomit", version=__version__)

    @app.get("/api/health")
    def health():
        return {"status": "ok", "checkpoints": sorted(registry.checkpoints)}

    @app.get("/api/meta")
    def meta():
        first = next(iter(registry.checkpoints.values()))
        _, cfg = first
        return {
            "attributes": ["warm_blob", "cool_blob"][: cfg.num_attrs]
            if cfg.num_attrs <= 2
            else [f"attr_{i}" for i in range(cfg.num_attrs)],
            "resolution": cfg.resolution,
            "checkpoints": sorted(registry.checkpoints),
            "version": __version__,
        }

    @app.post("/api/masks")
    def masks(req: MasksRequest):
        model, cfg = registry.get(req.checkpoint_id)
        x1, _ = _prepare_image(req.input_image, cfg.resolution)
        x2, _ = _prepare_image(req.exemplar_image, cfg.resolution)
        with torch.no_grad():
            m1 = model.extract_mask(x1)
            m2 = model.extract_mask(x2)
        return {
            "input_mask": _encode_png(tensor_to_mask(m1), "L"),
            "exemplar_mask": _encode_png(tensor_to_mask(m2), "L"),
        }

    @app.post("/api/translate")
    def translate(req: TranslateRequest, response: Response):
        model, cfg = registry.get(req.checkpoint_id)
        t0 = time.perf_counter()
        x1, r1 = _prepare_image(req.input_image, cfg.resolution)
        x2, r2 = _prepare_image(req.exemplar_image, cfg.resolution)
        if r1 or r2:
            response.headers["X-Input-Resized"] = f"{cfg.resolution}x{cfg.resolution}"
        m1 = _prepare_mask(req.input_mask_override, cfg.resolution)
        m2 = _prepare_mask(req.exemplar_mask_override, cfg.resolution)
        try:
            with torch.no_grad():
                res = model.translate(x1, x2, m1_override=m1, m2_override=m2)
        except Exception as e:
            raise HTTPException(status_code=500, detail=f"translation failed: {e}")
        return {
            "output_image": _encode_png(tensor_to_image(res.output), "RGB"),
            "input_mask": _encode_png(tensor_to_mask(res.input_mask), "L"),
            "exemplar_mask": _encode_png(tensor_to_mask(res.exemplar_mask), "L"),
            "timing_ms": (time.perf_counter() - t0) * 1000.0,
        }

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
