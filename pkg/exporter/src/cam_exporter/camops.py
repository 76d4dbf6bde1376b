"""Reference CAM math mirroring the engine's documented conventions.

The map is relu(sum_k w_k * A_k) with w_k the global average of the class
score's gradient over feature map k, bilinearly resized with corner-aligned
sampling and min-max rescaled to [0, 1] (constant maps become all-zero).
Keeping these conventions identical to the engine's is what makes
cross-boundary parity checks meaningful.
"""

from __future__ import annotations

import numpy as np


def gradcam_weights(grads: np.ndarray) -> np.ndarray:
    return grads.astype(np.float64).mean(axis=(1, 2))


def resize_bilinear(src: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
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
    lo = float(arr.min())
    hi = float(arr.max())
    if hi <= lo:
        return np.zeros_like(arr)
    return np.clip((arr - lo) / (hi - lo), 0.0, 1.0)


def cam_from_tensors(acts: np.ndarray, grads: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Activation stack + first derivatives -> logit map in [0, 1]."""
    w = gradcam_weights(grads)
    raw = np.maximum(np.tensordot(w, acts.astype(np.float64), axes=1), 0.0)
    return rescale_unit(resize_bilinear(raw, out_h, out_w))
