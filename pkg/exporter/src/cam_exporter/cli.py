"""Command-line front end for the exporter."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .export import ExportError, ExportJob, export

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".pgm", ".tif", ".tiff"}


def _collect_images(paths: list[str]) -> list[Path]:
    images: list[Path] = []
    for raw in paths:
        p = Path(raw)
        if p.is_dir():
            images.extend(sorted(
                q for q in p.iterdir() if q.suffix.lower() in IMAGE_SUFFIXES
            ))
        else:
            images.append(p)
    return images


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cam-export",
        description="Export Grad-CAM tensors/maps from a PyTorch classifier "
                    "in the camcal file formats.",
    )
    parser.add_argument("images", nargs="+", help="image files or directories")
    parser.add_argument("--checkpoint", required=True,
                        help="pickled nn.Module or TorchScript archive")
    parser.add_argument("--layer", required=True, help="named module to hook")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--model-id", default="", help="model column name (default: checkpoint stem)")
    parser.add_argument("--mode", choices=["maps", "tensors", "both"], default="both")
    parser.add_argument("--class-index", type=int, default=None,
                        help="class to explain (default: per-image argmax)")
    parser.add_argument("--crop", type=int, default=128, help="output size in pixels")
    parser.add_argument("--channels", type=int, choices=[1, 3], default=1)
    parser.add_argument("--norm-threshold", type=float, default=None,
                        help="clip normalized intensities above this value, then restretch")
    parser.add_argument("--gt-dir", default=None,
                        help="directory of mask images named like the inputs")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0
    try:
        job = ExportJob(
            checkpoint=args.checkpoint,
            layer=args.layer,
            images=_collect_images(args.images),
            out_dir=args.out,
            model_id=args.model_id,
            mode=args.mode,
            class_index=args.class_index,
            crop_size=args.crop,
            channels=args.channels,
            norm_threshold=args.norm_threshold,
            gt_dir=Path(args.gt_dir) if args.gt_dir else None,
        )
        result = export(job)
    except (ExportError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(f"exported {len(job.images)} images -> {result}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
