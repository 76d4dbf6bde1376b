"""Core 2-D map and mask types.

A ``LogitMap`` holds continuous per-pixel scores in [0, 1]; a ``BinaryMask``
holds boolean pixels. Both validate on construction and are frozen afterwards
(the backing arrays are marked read-only), so they can be shared freely
across workers.

Thresholding is strict: a pixel is positive iff its score is strictly
greater than the threshold. Consequently ``binarize(m, Threshold(1.0))`` is
always empty and ``binarize(m, Threshold(0.0))`` marks exactly the strictly
positive pixels. Comparisons are performed in float64 regardless of the
storage dtype.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LogitMap:
    """Per-pixel continuous scores in [0, 1], stored as float32.

    Values outside [0, 1] or non-finite values are rejected, not clamped:
    out-of-range inputs indicate a bug in whatever produced the map.
    """

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float32)
        if arr.ndim != 2:
            raise ValueError(f"logit map must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"logit map dimensions must be >= 1, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("logit map contains non-finite values")
        if float(arr.min()) < 0.0 or float(arr.max()) > 1.0:
            raise ValueError("logit map values must lie in [0, 1]")
        object.__setattr__(self, "values", _freeze(arr))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Per-pixel boolean mask (thresholded prediction or ground truth)."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values)
        if arr.dtype != np.bool_:
            raise ValueError(f"mask values must be boolean, got dtype {arr.dtype}")
        if arr.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"mask dimensions must be >= 1, got {arr.shape}")
        object.__setattr__(self, "values", _freeze(arr))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def is_empty(self) -> bool:
        return not bool(self.values.any())


@dataclass(frozen=True, order=True)
class Threshold:
    """Binarization cutoff in [0, 1].

    The default calibration grid produces the 11 values 0.0, 0.1, ..., 1.0,
    but any value in [0, 1] is accepted here.
    """

    value: float

    def __post_init__(self) -> None:
        v = float(self.value)
        if not np.isfinite(v) or v < 0.0 or v > 1.0:
            raise ValueError(f"threshold must lie in [0, 1], got {self.value!r}")
        object.__setattr__(self, "value", v)


def binarize(logit_map: LogitMap, t: Threshold) -> BinaryMask:
    """Mark every pixel whose score strictly exceeds ``t``."""
    return BinaryMask(logit_map.values.astype(np.float64) > t.value)


def positive_count(mask: BinaryMask) -> int:
    """Number of true pixels in the mask."""
    return int(np.count_nonzero(mask.values))
