"""Combining several models' thresholded masks into one prediction.

Combination happens after binarization: each member map is cut at its own
calibrated threshold first, then the boolean masks are merged. On binary
masks, summing predictions is the pixelwise union and multiplying them is
the pixelwise intersection, which is what the "or" and "and" operators
implement. "min" and "max" pick the single member mask with the fewest or
most positive pixels; ties go to the lowest member index so reruns are
order-stable.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .masks import BinaryMask, LogitMap, Threshold, binarize


class EnsembleOp(enum.Enum):
    """The four mask-combination operators."""

    OR = "or"
    AND = "and"
    MIN = "min"
    MAX = "max"

    @classmethod
    def parse(cls, name: str) -> "EnsembleOp":
        try:
            return cls(name.lower())
        except ValueError:
            valid = ", ".join(op.value for op in cls)
            raise ValueError(f"unknown ensemble operator {name!r} (expected one of {valid})")

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class EnsembleConfig:
    """Member models, one threshold per member, and the combination operator."""

    member_ids: tuple[str, ...]
    thresholds: tuple[Threshold, ...]
    op: EnsembleOp

    def __post_init__(self) -> None:
        members = tuple(self.member_ids)
        thresholds = tuple(self.thresholds)
        if len(members) == 0:
            raise ValueError("ensemble needs at least one member")
        if len(set(members)) != len(members):
            raise ValueError(f"member ids must be unique, got {members}")
        if len(thresholds) != len(members):
            raise ValueError(
                f"got {len(thresholds)} thresholds for {len(members)} members"
            )
        object.__setattr__(self, "member_ids", members)
        object.__setattr__(self, "thresholds", thresholds)

    def to_dict(self) -> dict:
        return {
            "members": list(self.member_ids),
            "thresholds": [t.value for t in self.thresholds],
            "op": self.op.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EnsembleConfig":
        try:
            members = tuple(str(m) for m in d["members"])
            thresholds = tuple(Threshold(float(t)) for t in d["thresholds"])
            op = EnsembleOp.parse(str(d["op"]))
        except KeyError as e:
            raise ValueError(f"ensemble config is missing key {e}")
        return cls(member_ids=members, thresholds=thresholds, op=op)


def combine(maps: Sequence[LogitMap], config: EnsembleConfig) -> BinaryMask:
    """Binarize each member map at its threshold, then apply the operator."""
    if len(maps) != len(config.member_ids):
        raise ValueError(
            f"got {len(maps)} maps for {len(config.member_ids)} members"
        )
    shape = maps[0].shape
    for m in maps[1:]:
        if m.shape != shape:
            raise ValueError(f"map dimensions {m.shape} do not match {shape}")

    masks = [binarize(m, t) for m, t in zip(maps, config.thresholds)]
    if config.op is EnsembleOp.OR:
        out = masks[0].values
        for m in masks[1:]:
            out = out | m.values
        return BinaryMask(out)
    if config.op is EnsembleOp.AND:
        out = masks[0].values
        for m in masks[1:]:
            out = out & m.values
        return BinaryMask(out)

    counts = np.array([np.count_nonzero(m.values) for m in masks])
    if config.op is EnsembleOp.MIN:
        return masks[int(np.argmin(counts))]  # first minimum: lowest index wins
    return masks[int(np.argmax(counts))]
