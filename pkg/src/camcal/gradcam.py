"""Localization maps from exported activation and gradient tensors.

The functions here are pure: they consume feature-map stacks and matching
derivative stacks that some classifier exported earlier, and produce
``LogitMap`` objects. Nothing in this module runs a network.

Conventions, since they affect boundary pixels and must hold everywhere the
maps are consumed:

* resizing is bilinear with corner-aligned sampling (output corner pixels
  sample input corner pixels exactly; size-preserving resize is an identity);
* the final map is min-max rescaled to [0, 1] per image, and a constant map
  (including all-zero) rescales to all-zero, the honest "no localization"
  signal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .masks import LogitMap, _freeze


@dataclass(frozen=True, eq=False)
class FeatureStack:
    """K feature-map planes of shape (k, u, v), all values finite.

    Stored as float64: weight computation must not lose precision to
    storage. The tensor file format quantizes to float32 at write time.
    """

    planes: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.planes, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError(f"stack must have shape (k, u, v), got {arr.shape}")
        k, u, v = arr.shape
        if k < 1 or u < 1 or v < 1:
            raise ValueError(f"stack dimensions must be >= 1, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("stack contains non-finite values")
        object.__setattr__(self, "planes", _freeze(arr))

    @property
    def k(self) -> int:
        return self.planes.shape[0]

    @property
    def u(self) -> int:
        return self.planes.shape[1]

    @property
    def v(self) -> int:
        return self.planes.shape[2]


@dataclass(frozen=True, eq=False)
class GradientStack(FeatureStack):
    """Derivative planes paired with a feature stack.

    ``order`` is the derivative order: 1, 2 or 3.
    """

    order: int = 1

    def __post_init__(self) -> None:
        if self.order not in (1, 2, 3):
            raise ValueError(f"gradient order must be 1, 2 or 3, got {self.order}")
        super().__post_init__()


@dataclass(frozen=True, eq=False)
class ImportanceWeights:
    """One scalar weight per feature map."""

    weights: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.weights, dtype=np.float64)
        if arr.ndim != 1 or arr.shape[0] < 1:
            raise ValueError(f"weights must be a non-empty vector, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("weights contain non-finite values")
        object.__setattr__(self, "weights", _freeze(arr))

    def __len__(self) -> int:
        return self.weights.shape[0]


def _check_same_dims(a: FeatureStack, b: FeatureStack, what: str) -> None:
    if a.planes.shape != b.planes.shape:
        raise ValueError(
            f"{what} dimensions {b.planes.shape} do not match {a.planes.shape}"
        )


def gradcam_weights(grads: GradientStack) -> ImportanceWeights:
    """Per-map importance: the global average of the first derivatives."""
    if grads.order != 1:
        raise ValueError(f"expected order-1 gradients, got order {grads.order}")
    w = grads.planes.astype(np.float64).mean(axis=(1, 2))
    return ImportanceWeights(w)


def gradcampp_weights(
    acts: FeatureStack,
    g1: GradientStack,
    g2: GradientStack,
    g3: GradientStack,
) -> ImportanceWeights:
    """Per-map importance from first, second and third derivatives.

    Each pixel gets the weight g2 / (2*g2 + S*g3) where S is the sum of the
    feature map's activations; pixels with a zero denominator contribute 0.
    The per-map weight sums the pixel weights gated by relu of the first
    derivative, so maps whose first derivative is nowhere positive get
    weight 0.
    """
    for stack, order, name in ((g1, 1, "first"), (g2, 2, "second"), (g3, 3, "third")):
        if stack.order != order:
            raise ValueError(f"{name}-derivative stack has order {stack.order}")
        _check_same_dims(acts, stack, f"{name}-derivative stack")

    a = acts.planes.astype(np.float64)
    d1 = g1.planes.astype(np.float64)
    d2 = g2.planes.astype(np.float64)
    d3 = g3.planes.astype(np.float64)

    act_sums = a.sum(axis=(1, 2)).reshape(-1, 1, 1)
    denom = 2.0 * d2 + act_sums * d3
    safe = np.where(denom == 0.0, 1.0, denom)
    alpha = np.where(denom == 0.0, 0.0, d2 / safe)
    w = (alpha * np.maximum(d1, 0.0)).sum(axis=(1, 2))
    return ImportanceWeights(w)


def resize_bilinear(src: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Corner-aligned bilinear resize of a 2-D array (float64 output)."""
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output dimensions must be >= 1, got {out_h}x{out_w}")
    src = np.asarray(src, dtype=np.float64)
    in_h, in_w = src.shape

    ys = np.linspace(0.0, in_h - 1.0, out_h)
    xs = np.linspace(0.0, in_w - 1.0, out_w)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]

    top = src[np.ix_(y0, x0)] * (1.0 - wx) + src[np.ix_(y0, x1)] * wx
    bottom = src[np.ix_(y1, x0)] * (1.0 - wx) + src[np.ix_(y1, x1)] * wx
    return top * (1.0 - wy) + bottom * wy


def rescale_unit(arr: np.ndarray) -> np.ndarray:
    """Min-max rescale to [0, 1]; a constant input becomes all-zero."""
    arr = np.asarray(arr, dtype=np.float64)
    lo = float(arr.min())
    hi = float(arr.max())
    if hi <= lo:
        return np.zeros_like(arr)
    return np.clip((arr - lo) / (hi - lo), 0.0, 1.0)


def cam_map(
    acts: FeatureStack,
    weights: ImportanceWeights,
    out_h: int,
    out_w: int,
) -> LogitMap:
    """Weighted, rectified sum of feature maps, resized and rescaled.

    The raw map is relu(sum_k w_k * A_k) at the stack's native resolution,
    bilinearly resized to ``out_h`` x ``out_w`` and min-max rescaled.
    """
    if len(weights) != acts.k:
        raise ValueError(
            f"got {len(weights)} weights for {acts.k} feature maps"
        )
    raw = np.tensordot(weights.weights, acts.planes.astype(np.float64), axes=1)
    raw = np.maximum(raw, 0.0)
    resized = resize_bilinear(raw, out_h, out_w)
    return LogitMap(rescale_unit(resized))


def smooth_average(maps: Sequence[LogitMap]) -> LogitMap:
    """Pixelwise mean of several maps, min-max rescaled back to [0, 1].

    This is the averaging half of noise-smoothed map generation; drawing the
    noisy samples requires model access and happens upstream.
    """
    if len(maps) == 0:
        raise ValueError("cannot average an empty list of maps")
    shape = maps[0].shape
    for m in maps[1:]:
        if m.shape != shape:
            raise ValueError(f"map dimensions {m.shape} do not match {shape}")
    stacked = np.stack([m.values.astype(np.float64) for m in maps])
    return LogitMap(rescale_unit(stacked.mean(axis=0)))
