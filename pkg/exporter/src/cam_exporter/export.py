"""Run a classifier over images and export CAM tensors, maps and a manifest.

The exporter hooks one named layer of a PyTorch model, runs each image
forward, backpropagates the chosen class score and captures the layer's
activations and gradients. Depending on the mode it writes TNS1 tensor
stacks (activations plus first derivatives, and second/third derivatives
approximated as elementwise powers of the first, the standard shortcut),
MSK1 logit maps computed with the reference CAM path, or both, plus a
manifest the engine loads directly.

Ground-truth masks come from an optional directory of image masks (any
nonzero pixel is foreground). Without one, empty masks are written so the
manifest still validates; calibrating against those is meaningless, but
format tooling and map viewing work.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
import json

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError

from .camops import cam_from_tensors
from .formats import _atomic_write, write_msk1, write_tns1

MANIFEST_SCHEMA = "camcal-manifest/1"
MODES = ("maps", "tensors", "both")


class ExportError(RuntimeError):
    pass


@dataclass
class ExportJob:
    checkpoint: Path
    layer: str
    images: list[Path]
    out_dir: Path
    model_id: str = ""
    mode: str = "both"
    class_index: int | None = None
    crop_size: int = 128
    channels: int = 1
    norm_threshold: float | None = None
    gt_dir: Path | None = None

    def __post_init__(self) -> None:
        self.checkpoint = Path(self.checkpoint)
        self.images = [Path(p) for p in self.images]
        self.out_dir = Path(self.out_dir)
        if not self.model_id:
            self.model_id = self.checkpoint.stem
        if self.mode not in MODES:
            raise ExportError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.images:
            raise ExportError("no input images")
        if self.crop_size < 8:
            raise ExportError("crop size must be >= 8")
        if self.channels not in (1, 3):
            raise ExportError("channels must be 1 or 3")
        if self.norm_threshold is not None and not 0.0 < self.norm_threshold <= 1.0:
            raise ExportError("normalization threshold must lie in (0, 1]")


def load_model(path: Path) -> torch.nn.Module:
    """Load a pickled nn.Module checkpoint, falling back to TorchScript."""
    if not Path(path).is_file():
        raise ExportError(f"checkpoint not found: {path}")
    try:
        model = torch.load(str(path), map_location="cpu", weights_only=False)
    except Exception as pickle_error:
        try:
            return torch.jit.load(str(path), map_location="cpu")
        except Exception:
            raise ExportError(f"cannot load checkpoint {path}: {pickle_error}")
    if not isinstance(model, torch.nn.Module):
        raise ExportError(
            f"{path} does not contain a module (got {type(model).__name__}); "
            "save the whole model, not just a state dict"
        )
    return model


def find_layer(model: torch.nn.Module, name: str) -> torch.nn.Module:
    modules = dict(model.named_modules())
    modules.pop("", None)
    if name not in modules:
        available = ", ".join(sorted(modules))
        raise ExportError(f"layer {name!r} not found; available layers: {available}")
    return modules[name]


def preprocess(path: Path, crop_size: int, channels: int,
               norm_threshold: float | None) -> np.ndarray:
    """Decode, resize and normalize one image to (C, crop, crop) in [0, 1]."""
    try:
        with Image.open(path) as img:
            img = img.convert("L" if channels == 1 else "RGB")
            img = img.resize((crop_size, crop_size), Image.BILINEAR)
            arr = np.asarray(img, dtype=np.float32) / 255.0
    except (FileNotFoundError, UnidentifiedImageError, OSError) as e:
        raise ExportError(f"cannot decode image {path}: {e}")
    lo, hi = float(arr.min()), float(arr.max())
    arr = (arr - lo) / (hi - lo) if hi > lo else np.zeros_like(arr)
    if norm_threshold is not None:
        # clip bright outliers at the threshold, then restretch
        arr = np.minimum(arr, norm_threshold) / norm_threshold
    if channels == 1:
        return arr[None, :, :]
    return arr.transpose(2, 0, 1)


def capture(model: torch.nn.Module, layer: torch.nn.Module,
            frame: np.ndarray, class_index: int | None):
    """Forward one frame, backprop the class score, return acts/grads/class."""
    captured = {}

    def hook(_module, _inputs, output):
        captured["acts"] = output

    handle = layer.register_forward_hook(hook)
    try:
        x = torch.from_numpy(frame[None]).float().requires_grad_(True)
        logits = model(x)
        if logits.ndim != 2 or logits.shape[0] != 1:
            raise ExportError(f"expected (1, n_classes) logits, got {tuple(logits.shape)}")
        if "acts" not in captured:
            raise ExportError("target layer did not run during the forward pass")
        idx = int(logits.argmax(dim=1).item()) if class_index is None else class_index
        if not 0 <= idx < logits.shape[1]:
            raise ExportError(f"class index {idx} out of range for {logits.shape[1]} classes")
        acts = captured["acts"]
        if acts.ndim != 4:
            raise ExportError(f"target layer must output (1, k, u, v), got {tuple(acts.shape)}")
        grads = torch.autograd.grad(logits[0, idx], acts)[0]
    finally:
        handle.remove()
    return (
        acts[0].detach().numpy().astype(np.float32),
        grads[0].detach().numpy().astype(np.float32),
        idx,
    )


def _load_gt(job: ExportJob, image_path: Path) -> np.ndarray:
    if job.gt_dir is None:
        return np.zeros((job.crop_size, job.crop_size), dtype=np.float32)
    candidates = sorted(Path(job.gt_dir).glob(image_path.stem + ".*"))
    if not candidates:
        raise ExportError(f"no ground-truth mask for {image_path.stem!r} in {job.gt_dir}")
    try:
        with Image.open(candidates[0]) as img:
            img = img.convert("L").resize((job.crop_size, job.crop_size), Image.NEAREST)
            return (np.asarray(img) > 0).astype(np.float32)
    except (UnidentifiedImageError, OSError) as e:
        raise ExportError(f"cannot decode mask {candidates[0]}: {e}")


def export(job: ExportJob) -> Path:
    """Run the job; returns the manifest path (maps modes) or the out dir."""
    model = load_model(job.checkpoint)
    model.eval()
    layer = find_layer(model, job.layer)

    stems = [p.stem for p in job.images]
    if len(set(stems)) != len(stems):
        raise ExportError("image file stems must be unique, they become image ids")

    entries = {}
    for image_path in job.images:
        image_id = image_path.stem
        frame = preprocess(image_path, job.crop_size, job.channels, job.norm_threshold)
        acts, grads, _ = capture(model, layer, frame, job.class_index)

        if job.mode in ("tensors", "both"):
            tdir = job.out_dir / "tensors"
            write_tns1(acts, 0, tdir / f"{image_id}_acts.tns")
            write_tns1(grads, 1, tdir / f"{image_id}_grads.tns")
            # power-of-first-derivative approximation for the ++ variant
            write_tns1(grads * grads, 2, tdir / f"{image_id}_grads2.tns")
            write_tns1(grads * grads * grads, 3, tdir / f"{image_id}_grads3.tns")

        if job.mode in ("maps", "both"):
            cam = cam_from_tensors(acts, grads, job.crop_size, job.crop_size)
            if cam.min() < 0.0 or cam.max() > 1.0:
                raise ExportError(f"computed map for {image_id!r} leaves [0, 1]")
            map_rel = f"maps/{job.model_id}/{image_id}.msk"
            write_msk1(cam, job.out_dir / map_rel)

            gt = _load_gt(job, image_path)
            gt_rel = f"gt/{image_id}.msk"
            write_msk1(gt, job.out_dir / gt_rel)
            entries[image_id] = {
                "gt": gt_rel,
                "maps": {job.model_id: map_rel},
                "fold": 0,
                "gt_empty": not bool(gt.any()),
            }

    if job.mode == "tensors":
        return job.out_dir

    manifest = {
        "schema": MANIFEST_SCHEMA,
        "dims": {"height": job.crop_size, "width": job.crop_size},
        "models": [job.model_id],
        "n_folds": 1,
        "images": entries,
        "run": {
            "engine": "cam-exporter",
            "checkpoint": str(job.checkpoint),
            "layer": job.layer,
            "mode": job.mode,
            "crop_size": job.crop_size,
            "channels": job.channels,
            "norm_threshold": job.norm_threshold,
            "class_index": job.class_index,
        },
    }
    path = job.out_dir / "manifest.json"
    _atomic_write(path, (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode("utf-8"))
    return path
