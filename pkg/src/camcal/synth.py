"""Synthetic corpora with controlled, complementary model errors.

Each non-empty ground truth is a single elliptical blob. Every pseudo-model
sees a shifted and dilated copy of that blob: full confidence inside, a
linear falloff outside, plus seeded Gaussian noise, one smoothing pass and a
min-max rescale. Giving the models opposite shift directions makes their
false-positive pixels land on opposite sides of the blob, the situation a
low-threshold intersection ensemble exploits.

Randomness comes from Philox4x64-10 counter-based generators with explicit
integer keys: the corpus-level key is ``(seed << 64) + 1`` and image ``i``
uses ``(seed << 64) + 2 * i``, so corpora are reproducible from the seed
alone and images can be generated independently in any order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .corpus import Corpus, Sample
from .gradcam import rescale_unit
from .masks import BinaryMask, LogitMap

FALLOFF_PX = 6.0  # width of the confidence falloff ring outside the blob


@dataclass(frozen=True)
class ModelProfile:
    """Error pattern of one pseudo-model."""

    name: str
    bias: tuple[float, float] = (0.0, 0.0)  # (dy, dx) center offset in pixels
    dilation: float = 0.0  # radius increase in pixels
    noise: float = 0.0  # Gaussian noise amplitude
    smoothing: float = 0.0  # Gaussian blur sigma in pixels

    def __post_init__(self) -> None:
        if self.dilation < 0 or self.noise < 0 or self.smoothing < 0:
            raise ValueError("dilation, noise and smoothing must be non-negative")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "bias": list(self.bias),
            "dilation": self.dilation,
            "noise": self.noise,
            "smoothing": self.smoothing,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelProfile":
        return cls(
            name=str(d["name"]),
            bias=(float(d["bias"][0]), float(d["bias"][1])),
            dilation=float(d.get("dilation", 0.0)),
            noise=float(d.get("noise", 0.0)),
            smoothing=float(d.get("smoothing", 0.0)),
        )


@dataclass(frozen=True)
class SynthSpec:
    """Full recipe for a synthetic corpus; a fixed seed fixes every byte."""

    n_images: int
    height: int
    width: int
    empty_fraction: float
    radius_range: tuple[float, float]
    models: tuple[ModelProfile, ...]
    seed: int

    def __post_init__(self) -> None:
        if self.n_images < 1:
            raise ValueError("need at least one image")
        if self.height < 8 or self.width < 8:
            raise ValueError("image dimensions must be >= 8")
        if not 0.0 <= self.empty_fraction <= 1.0:
            raise ValueError("empty_fraction must lie in [0, 1]")
        r_min, r_max = self.radius_range
        if not 1.0 <= r_min <= r_max:
            raise ValueError("radius range must satisfy 1 <= r_min <= r_max")
        if 2 * r_max > min(self.height, self.width) - 2:
            raise ValueError("maximum radius does not fit the image")
        if not self.models:
            raise ValueError("need at least one model profile")
        names = [m.name for m in self.models]
        if len(set(names)) != len(names):
            raise ValueError(f"model names must be unique, got {names}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @classmethod
    def default(cls) -> "SynthSpec":
        """600 images at 64x64 with two opposite-bias models, 30% empty."""
        return cls(
            n_images=600,
            height=64,
            width=64,
            empty_fraction=0.3,
            radius_range=(6.0, 14.0),
            models=(
                ModelProfile("model_a", bias=(3.0, 3.0), dilation=2.0,
                             noise=0.08, smoothing=1.5),
                ModelProfile("model_b", bias=(-3.0, -3.0), dilation=2.0,
                             noise=0.08, smoothing=1.5),
            ),
            seed=42,
        )

    def to_dict(self) -> dict:
        return {
            "n_images": self.n_images,
            "height": self.height,
            "width": self.width,
            "empty_fraction": self.empty_fraction,
            "radius_range": list(self.radius_range),
            "models": [m.to_dict() for m in self.models],
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        try:
            return cls(
                n_images=int(d["n_images"]),
                height=int(d["height"]),
                width=int(d["width"]),
                empty_fraction=float(d["empty_fraction"]),
                radius_range=(float(d["radius_range"][0]), float(d["radius_range"][1])),
                models=tuple(ModelProfile.from_dict(m) for m in d["models"]),
                seed=int(d["seed"]),
            )
        except KeyError as e:
            raise ValueError(f"synth spec is missing key {e}")


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=(seed << 64) + stream))


def _ellipse(h: int, w: int, cy: float, cx: float, ry: float, rx: float) -> np.ndarray:
    ys = np.arange(h, dtype=np.float64)[:, None]
    xs = np.arange(w, dtype=np.float64)[None, :]
    return ((ys - cy) / ry) ** 2 + ((xs - cx) / rx) ** 2 <= 1.0


def _model_map(
    profile: ModelProfile,
    noise_field: np.ndarray,
    blob: tuple[float, float, float, float] | None,
) -> LogitMap:
    h, w = noise_field.shape
    if blob is None:
        raw = np.zeros((h, w), dtype=np.float64)
    else:
        cy, cx, ry, rx = blob
        cy += profile.bias[0]
        cx += profile.bias[1]
        ry += profile.dilation
        rx += profile.dilation
        ys = np.arange(h, dtype=np.float64)[:, None]
        xs = np.arange(w, dtype=np.float64)[None, :]
        d = np.sqrt(((ys - cy) / ry) ** 2 + ((xs - cx) / rx) ** 2)
        outside_px = np.maximum(d - 1.0, 0.0) * min(ry, rx)
        raw = np.clip(1.0 - outside_px / FALLOFF_PX, 0.0, 1.0)
    field = raw + profile.noise * noise_field
    if profile.smoothing > 0:
        field = gaussian_filter(field, sigma=profile.smoothing)
    return LogitMap(rescale_unit(field))


def image_ids(spec: SynthSpec) -> list[str]:
    digits = max(4, len(str(spec.n_images - 1)))
    return [f"img_{i:0{digits}d}" for i in range(spec.n_images)]


def generate(spec: SynthSpec) -> Corpus:
    """Build the corpus in memory: ground truths plus one map per model."""
    n_empty = round(spec.n_images * spec.empty_fraction)
    order = _rng(spec.seed, 1).permutation(spec.n_images)
    empty_set = set(int(i) for i in order[:n_empty])

    ids = image_ids(spec)
    r_min, r_max = spec.radius_range
    corpus: Corpus = {}
    for i, image_id in enumerate(ids):
        rng = _rng(spec.seed, 2 * i)
        ry = rng.uniform(r_min, r_max)
        rx = rng.uniform(r_min, r_max)
        cy = rng.uniform(ry, spec.height - 1 - ry)
        cx = rng.uniform(rx, spec.width - 1 - rx)
        if i in empty_set:
            blob = None
            gt = np.zeros((spec.height, spec.width), dtype=bool)
        else:
            blob = (cy, cx, ry, rx)
            gt = _ellipse(spec.height, spec.width, cy, cx, ry, rx)
        maps = {}
        for profile in spec.models:
            noise_field = rng.standard_normal((spec.height, spec.width))
            maps[profile.name] = _model_map(profile, noise_field, blob)
        corpus[image_id] = Sample(gt=BinaryMask(gt), maps=maps)
    return corpus
