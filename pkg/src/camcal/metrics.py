"""Dice and mean-IoU over binary masks.

Empty-mask semantics are pinned here and relied on everywhere else:

* DSC of two empty masks is 1.0 (a correctly predicted empty image counts
  as a success);
* a class absent from both ground truth and prediction contributes IoU 1.0
  to the mean.

Dataset-level scores are means of per-image scores, not a pooled confusion
matrix; the empty-image credit above only makes sense per image.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .masks import BinaryMask, positive_count

N_CLASSES = 2  # background = 0, foreground = 1


@dataclass(frozen=True, eq=False)
class ConfusionCounts:
    """Pixel counts ``p[i][j]``: predicted class i, labelled class j."""

    p: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.p, dtype=np.int64)
        if arr.shape != (N_CLASSES, N_CLASSES):
            raise ValueError(f"expected a {N_CLASSES}x{N_CLASSES} table, got {arr.shape}")
        if arr.min() < 0:
            raise ValueError("confusion counts must be non-negative")
        arr.setflags(write=False)
        object.__setattr__(self, "p", arr)

    @property
    def n_classes(self) -> int:
        return N_CLASSES

    @property
    def total(self) -> int:
        return int(self.p.sum())

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        # associative merge, so per-image tallies reduce in any order
        return ConfusionCounts(self.p + other.p)


@dataclass(frozen=True)
class ScorePair:
    """A DSC and an mIoU value, both in [0, 1]."""

    dsc: float
    miou: float

    def __post_init__(self) -> None:
        for name, v in (("dsc", self.dsc), ("miou", self.miou)):
            if not np.isfinite(v) or v < 0.0 or v > 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v!r}")


def _check_dims(gt: BinaryMask, pred: BinaryMask) -> None:
    if gt.shape != pred.shape:
        raise ValueError(f"mask dimensions {pred.shape} do not match {gt.shape}")


def accumulate(gt: BinaryMask, pred: BinaryMask) -> ConfusionCounts:
    """Per-pixel confusion tally of a prediction against ground truth."""
    _check_dims(gt, pred)
    g = gt.values
    q = pred.values
    tp = int(np.count_nonzero(g & q))
    fp = int(np.count_nonzero(~g & q))
    fn = int(np.count_nonzero(g & ~q))
    tn = g.size - tp - fp - fn
    return ConfusionCounts(np.array([[tn, fn], [fp, tp]], dtype=np.int64))


def dsc(gt: BinaryMask, pred: BinaryMask) -> float:
    """Dice similarity: 2|gt & pred| / (|gt| + |pred|); empty vs empty is 1.0."""
    _check_dims(gt, pred)
    inter = int(np.count_nonzero(gt.values & pred.values))
    total = positive_count(gt) + positive_count(pred)
    if total == 0:
        return 1.0
    return 2.0 * inter / total


def miou(counts: ConfusionCounts) -> float:
    """Mean over classes of p_ii / (row_i + col_i - p_ii).

    A class absent from both prediction and label has a zero denominator
    and contributes 1.0.
    """
    p = counts.p
    ious = []
    for i in range(N_CLASSES):
        denom = int(p[i, :].sum()) + int(p[:, i].sum()) - int(p[i, i])
        ious.append(1.0 if denom == 0 else int(p[i, i]) / denom)
    return (ious[0] + ious[1]) / 2.0


def score_pair(gt: BinaryMask, pred: BinaryMask) -> ScorePair:
    """Both metrics for one image."""
    return ScorePair(dsc=dsc(gt, pred), miou=miou(accumulate(gt, pred)))
