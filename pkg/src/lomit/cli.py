"""Command-line entry points for training, data generation, inference,
evaluation, and the HTTP service."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np
import torch

from .errors import LomitError


def _cmd_train(args) -> int:
    from .training import load_train_config, train

    cfg = load_train_config(args.config)
    final = train(cfg, args.out, resume_from=args.resume, progress=True)
    print(f"final checkpoint: {final}")
    return 0


def _cmd_synth_data(args) -> int:
    from .data import SyntheticConfig, export_synthetic, generate_synthetic

    cfg = SyntheticConfig(count=args.count, resolution=args.resolution, seed=args.seed)
    manifest = export_synthetic(generate_synthetic(cfg), args.out)
    print(f"wrote {args.count} samples, manifest: {manifest}")
    return 0


def _load_image(path: str) -> np.ndarray:
    from PIL import Image as PILImage

    return np.asarray(PILImage.open(path).convert("RGB"))


def _load_mask(path: str, resolution: int) -> torch.Tensor:
    from PIL import Image as PILImage
    from .errors import DimensionError

    arr = np.asarray(PILImage.open(path).convert("L"))
    if arr.shape != (resolution, resolution):
        raise DimensionError(f"mask {path} is {arr.shape[::-1]}, expected {resolution}x{resolution}")
    return torch.from_numpy(arr.astype(np.float32) / 255.0).unsqueeze(0).unsqueeze(0)


def _save_image(arr: np.ndarray, path: str) -> None:
    from PIL import Image as PILImage

    Path(path).parent.mkdir(parents=True, exist_ok=True)
    PILImage.fromarray(arr).save(path)


def _cmd_translate(args) -> int:
    from .errors import DimensionError
    from .service import image_to_tensor, tensor_to_image, tensor_to_mask
    from .training import load_model

    model, cfg = load_model(args.checkpoint)
    inp = _load_image(args.input)
    exe = _load_image(args.exemplar)
    if inp.shape != exe.shape:
        raise DimensionError(f"input {inp.shape[:2]} and exemplar {exe.shape[:2]} sizes differ")
    if inp.shape[:2] != (cfg.resolution, cfg.resolution):
        raise DimensionError(
            f"images are {inp.shape[:2]}, checkpoint expects {cfg.resolution}x{cfg.resolution}"
        )
    m1 = _load_mask(args.input_mask, cfg.resolution) if args.input_mask else None
    m2 = _load_mask(args.exemplar_mask, cfg.resolution) if args.exemplar_mask else None
    with torch.no_grad():
        res = model.translate(image_to_tensor(inp), image_to_tensor(exe), m1_override=m1, m2_override=m2)
    _save_image(tensor_to_image(res.output), args.out)
    if args.out_masks:
        stem = Path(args.out)
        _save_image(tensor_to_mask(res.input_mask), str(stem.with_suffix(".input_mask.png")))
        _save_image(tensor_to_mask(res.exemplar_mask), str(stem.with_suffix(".exemplar_mask.png")))
    print(f"wrote {args.out}")
    return 0


def _cmd_extract_mask(args) -> int:
    from .errors import DimensionError
    from .service import image_to_tensor, tensor_to_mask
    from .training import load_model

    model, cfg = load_model(args.checkpoint)
    inp = _load_image(args.input)
    if inp.shape[:2] != (cfg.resolution, cfg.resolution):
        raise DimensionError(
            f"image is {inp.shape[:2]}, checkpoint expects {cfg.resolution}x{cfg.resolution}"
        )
    with torch.no_grad():
        mask = model.extract_mask(image_to_tensor(inp))
    _save_image(tensor_to_mask(mask), args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    from .data import load_dataset, load_manifest, MANIFEST_NAME
    from .evaluation import evaluate, make_conv_extractor, make_pixel_extractor
    from .figures import render_metric_hist, render_sample_grid
    from .training import load_model

    model, cfg = load_model(args.checkpoint)
    manifest_path = Path(args.data)
    if manifest_path.is_dir():
        manifest_path = manifest_path / MANIFEST_NAME
    dataset = load_dataset(load_manifest(manifest_path))
    extractor = (
        make_pixel_extractor() if args.extractor == "pixel" else make_conv_extractor(cfg.resolution)
    )
    report = evaluate(model, dataset, extractor, seed=args.seed, max_samples=args.max_samples)
    out = Path(args.report)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.to_json())
    report.write_csv(out.with_suffix(".csv"))
    render_sample_grid(model, dataset, out.with_name(out.stem + "_samples.png"))
    render_metric_hist(report, out.with_name(out.stem + "_metrics.png"))
    print(
        f"IoU={report.mask_iou:.4f} fg_err={report.fg_transfer_error:.4f} "
        f"bg_err={report.bg_preservation_error:.4f} frechet={report.frechet}"
    )
    print(f"report: {out}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn
    from .service import create_app

    checkpoint = args.checkpoint or os.environ.get("LOMIT_CHECKPOINT")
    if not checkpoint:
        print("error: --checkpoint or LOMIT_CHECKPOINT is required", file=sys.stderr)
        return 2
    port = args.port if args.port is not None else int(os.environ.get("LOMIT_PORT", "8000"))
    app = create_app({"default": checkpoint}, static_dir=args.static)
    uvicorn.run(app, host=args.host, port=port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lomit", description="Exemplar-guided local-mask image translation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run the training loop")
    p.add_argument("--config", required=True, help="YAML config mirroring TrainConfig fields")
    p.add_argument("--out", required=True, help="run directory for checkpoints and logs")
    p.add_argument("--resume", default=None, help="checkpoint to resume from")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("synth-data", help="generate the synthetic blob dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resolution", type=int, default=64)
    p.set_defaults(fn=_cmd_synth_data)

    p = sub.add_parser("translate", help="translate one image toward an exemplar's style")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--exemplar", required=True)
    p.add_argument("--input-mask", default=None)
    p.add_argument("--exemplar-mask", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--out-masks", action="store_true", help="also write the masks used")
    p.set_defaults(fn=_cmd_translate)

    p = sub.add_parser("extract-mask", help="extract the model's soft mask for an image")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_extract_mask)

    p = sub.add_parser("evaluate", help="run metrics over a dataset and render figures")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="dataset directory or manifest path")
    p.add_argument("--report", required=True, help="output report JSON path")
    p.add_argument("--extractor", choices=["conv", "pixel"], default="conv")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-samples", type=int, default=None)
    p.set_defaults(fn=_cmd_evaluate)

    p = sub.add_parser("serve", help="HTTP service for the mask-editor UI")
    p.add_argument("--checkpoint", default=None, help="(or env LOMIT_CHECKPOINT)")
    p.add_argument("--port", type=int, default=None, help="(or env LOMIT_PORT)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--static", default=None, help="static asset directory to serve at /")
    p.set_defaults(fn=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2
    try:
        return args.fn(args)
    except LomitError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
