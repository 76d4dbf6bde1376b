"""camcal: threshold calibration for ensembles of CAM-style segmentations.

The package turns exported network tensors into localization maps, combines
several models' maps with simple mask operators, and exhaustively searches
per-model binarization thresholds on a training split, reporting Dice and
mean-IoU under cross-validation.
"""

__version__ = "0.1.0"

from .calibration import (
    EvalReport,
    FoldSpec,
    Objective,
    SearchResult,
    ThresholdGrid,
    cross_validate,
    empty_baseline,
    evaluate,
    export_heatmap,
    search,
)
from .corpus import Corpus, Sample
from .ensemble import EnsembleConfig, EnsembleOp, combine
from .gradcam import (
    FeatureStack,
    GradientStack,
    ImportanceWeights,
    cam_map,
    gradcam_weights,
    gradcampp_weights,
    smooth_average,
)
from .masks import BinaryMask, LogitMap, Threshold, binarize, positive_count
from .metrics import ConfusionCounts, ScorePair, accumulate, dsc, miou
from .synth import ModelProfile, SynthSpec, generate

__all__ = [
    "__version__",
    "BinaryMask",
    "ConfusionCounts",
    "Corpus",
    "EnsembleConfig",
    "EnsembleOp",
    "EvalReport",
    "FeatureStack",
    "FoldSpec",
    "GradientStack",
    "ImportanceWeights",
    "LogitMap",
    "ModelProfile",
    "Objective",
    "Sample",
    "ScorePair",
    "SearchResult",
    "SynthSpec",
    "Threshold",
    "ThresholdGrid",
    "accumulate",
    "binarize",
    "cam_map",
    "combine",
    "cross_validate",
    "dsc",
    "empty_baseline",
    "evaluate",
    "export_heatmap",
    "generate",
    "gradcam_weights",
    "gradcampp_weights",
    "miou",
    "positive_count",
    "search",
    "smooth_average",
]
