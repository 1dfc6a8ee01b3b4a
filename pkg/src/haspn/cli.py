"""Command-line interface: prepare, train, eval, infer, profile.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 checkpoint
error. Every subcommand is deterministic given its flags and seeds.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import torch

from . import dataio, metrics, trainer
from .config import parse_run_config
from .errors import CheckpointError, ConfigError, DataError
from .frequency import decompose


def _parse_ratios(raw: str) -> tuple[float, float, float]:
    parts = tuple(float(p) for p in raw.split(","))
    if len(parts) != 3:
        raise ConfigError(f"--ratios needs 3 comma-separated values, got {raw!r}")
    return parts


def cmd_prepare(args: argparse.Namespace) -> int:
    if args.crop % args.scale != 0:
        raise ConfigError(f"--crop {args.crop} must be divisible by --scale {args.scale}")
    out = Path(args.output)
    manifest = dataio.build_manifest(args.input, _parse_ratios(args.ratios), args.seed)
    (out / "hr").mkdir(parents=True, exist_ok=True)
    (out / "lr").mkdir(parents=True, exist_ok=True)

    splits: dict[str, list[str]] = {}
    index = 0
    for split in dataio.SPLIT_NAMES:
        splits[split] = []
        for rel in manifest.splits[split]:
            hr = dataio.load_image(Path(args.input) / rel)
            seed = int(np.random.SeedSequence((args.seed, index)).generate_state(1)[0])
            crop = dataio.random_crop(hr, args.crop, seed)
            name = Path(rel).name
            dataio.save_image(crop, out / "hr" / name)
            # Under-sample the quantized crop so the cached LR is an exact
            # column subset of the stored HR PNG.
            stored = dataio.load_image(out / "hr" / name)
            dataio.save_image(dataio.undersample_columns(stored, args.scale), out / "lr" / name)
            splits[split].append(f"hr/{name}")
            index += 1

    prepared = dataio.DatasetManifest(
        splits=splits, seed=args.seed, crop=args.crop, scale=args.scale
    )
    dataio.write_manifest(prepared, out / "manifest.txt")
    meta = {
        "crop": args.crop,
        "scale": args.scale,
        "seed": args.seed,
        "lr_width": args.crop // args.scale,
        "splits": {name: len(paths) for name, paths in splits.items()},
    }
    (out / "meta.json").write_bytes(
        (json.dumps(meta, sort_keys=True, indent=2) + "\n").encode("utf-8")
    )
    counts = ", ".join(f"{k}={len(v)}" for k, v in splits.items())
    print(f"prepared {index} images ({counts}); hr {args.crop}x{args.crop}, "
          f"lr width {args.crop // args.scale}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    config = parse_run_config(args.config)
    ckpt = trainer.train(config, resume=args.resume)
    val = ckpt.val_metrics
    print(f"finished epoch {ckpt.epoch}: val_psnr={val.get('psnr')!r} val_ssim={val.get('ssim')!r}")
    return 0


def _load_eval_items(data_dir: str) -> list[tuple[str, np.ndarray]]:
    root = Path(data_dir)
    paths = sorted(root.glob("*.png"))
    if not paths:
        raise DataError(f"{root}: no PNG images found")
    return [(p.name, dataio.load_image(p)) for p in paths]


def cmd_eval(args: argparse.Namespace) -> int:
    ckpt = trainer.load_checkpoint(args.ckpt)
    model = trainer.model_from_checkpoint(ckpt)
    report = trainer.evaluate(
        model, _load_eval_items(args.data), scale=args.scale, peak=args.peak,
        ssim_mode=args.ssim,
    )
    trainer.write_report(report, args.report)
    print(f"evaluated {len(report.rows)} images: mean_psnr={report.mean_psnr!r} "
          f"mean_ssim={report.mean_ssim!r}")
    return 0


def cmd_infer(args: argparse.Namespace) -> int:
    ckpt = trainer.load_checkpoint(args.ckpt)
    model = trainer.model_from_checkpoint(ckpt)
    lr = dataio.load_image(args.image)
    lr_hf = decompose(lr).residual
    with torch.no_grad():
        _, _, fused = model(
            torch.from_numpy(lr[None, None].astype(np.float32)),
            torch.from_numpy(lr_hf[None, None].astype(np.float32)),
        )
    sr = fused[0, 0].clamp(0.0, 1.0).numpy().astype(np.float64)
    dataio.save_image(sr, args.out)
    print(f"wrote {args.out} ({sr.shape[0]}x{sr.shape[1]})")
    return 0


def cmd_profile(args: argparse.Namespace) -> int:
    paths = [p for p in args.images.split(",") if p]
    if not paths:
        raise DataError("--images is empty")
    images = [dataio.load_image(p) for p in paths]
    heights = {img.shape[0] for img in images}
    if len(heights) != 1:
        raise DataError(f"images must share height, got {sorted(heights)}")
    profiles = [metrics.aline_profile(img, args.column) for img in images]
    lines = ["row," + ",".join(paths) + "\n"]
    for row in range(images[0].shape[0]):
        values = ",".join(repr(profile[row][1]) for profile in profiles)
        lines.append(f"{row},{values}\n")
    Path(args.out).write_bytes("".join(lines).encode("utf-8"))
    print(f"wrote {args.out} ({images[0].shape[0]} rows, {len(paths)} images)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="haspn",
        description="Under-sampled OCT super-resolution: data prep, training, "
        "evaluation, inference, and profile export.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="crop images, build splits, cache LR/HR pairs")
    p.add_argument("--input", required=True, help="directory of source PNG images")
    p.add_argument("--output", required=True, help="output dataset directory")
    p.add_argument("--crop", type=int, default=256, help="square crop size")
    p.add_argument("--scale", type=int, default=4, help="column under-sampling factor")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ratios", default="0.8125,0.125,0.0625", help="train,val,test fractions")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="run the training loop from a config file")
    p.add_argument("--config", required=True, help="INI run configuration")
    p.add_argument("--resume", default=None, help="checkpoint to resume from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint over a directory of images")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True, help="directory of ground-truth PNGs")
    p.add_argument("--scale", type=int, required=True)
    p.add_argument("--report", required=True, help="output CSV path")
    p.add_argument("--peak", choices=("fixed", "literal"), default="fixed")
    p.add_argument("--ssim", choices=("global", "windowed"), default="windowed")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("infer", help="super-resolve one low-resolution PNG")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--image", required=True, help="input LR PNG")
    p.add_argument("--out", required=True, help="output PNG path")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("profile", help="export A-line profiles of one column")
    p.add_argument("--images", required=True, help="comma-separated image paths")
    p.add_argument("--column", type=int, required=True)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_profile)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CheckpointError as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return 4
    except (DataError, OSError, ValueError, IndexError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
