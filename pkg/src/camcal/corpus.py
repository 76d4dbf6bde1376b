"""In-memory corpus container shared by the calibration and synth modules."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Mapping

from .masks import BinaryMask, LogitMap


@dataclass(frozen=True)
class Sample:
    """One image: its ground-truth mask and one logit map per model."""

    gt: BinaryMask
    maps: Mapping[str, LogitMap]

    def __post_init__(self) -> None:
        for member, m in self.maps.items():
            if m.shape != self.gt.shape:
                raise ValueError(
                    f"map for {member!r} has shape {m.shape}, ground truth is {self.gt.shape}"
                )


Corpus = Dict[str, Sample]
