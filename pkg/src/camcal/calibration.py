"""Exhaustive threshold-grid search, fold-wise evaluation and reporting.

``search`` scores every threshold tuple in grid^members on a training subset
and returns the argmax together with the full score surface; ``evaluate``
applies a fixed configuration to a held-out subset; ``cross_validate`` cycles
the folds. Two runs over the same corpus produce bit-identical results no
matter how many worker threads are used: every surface cell is a pure
function of the corpus, and cells are written into the surface by index.

Scores are means of per-image metrics (see the metrics module for why).
The reported variation is the maximum absolute deviation of any fold from
the mean, labelled "+/-" in reports.
"""

from __future__ import annotations

import csv
import enum
import io
import itertools
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, Sequence

import numpy as np

from .corpus import Corpus
from .ensemble import EnsembleConfig, EnsembleOp
from .masks import BinaryMask, Threshold
from .metrics import ScorePair, score_pair
from ._fsio import atomic_write_text


class Objective(enum.Enum):
    """Which metric the search maximizes. Means DSC unless told otherwise."""

    DSC = "dsc"
    MIOU = "miou"

    @classmethod
    def parse(cls, name: str) -> "Objective":
        try:
            return cls(name.lower())
        except ValueError:
            raise ValueError(f"unknown objective {name!r} (expected dsc or miou)")


@dataclass(frozen=True)
class ThresholdGrid:
    """Strictly increasing thresholds to search, all in [0, 1]."""

    values: tuple[Threshold, ...]

    def __post_init__(self) -> None:
        values = tuple(self.values)
        if len(values) == 0:
            raise ValueError("threshold grid cannot be empty")
        for a, b in zip(values, values[1:]):
            if not a.value < b.value:
                raise ValueError("threshold grid must be strictly increasing")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    @classmethod
    def default(cls) -> "ThresholdGrid":
        """The 11-point grid 0.0, 0.1, ..., 1.0."""
        return cls.from_step(0.1)

    @classmethod
    def from_step(cls, step: float) -> "ThresholdGrid":
        """Evenly spaced grid from 0 upward in the given step, capped at 1."""
        if not 0.0 < step <= 1.0:
            raise ValueError(f"grid step must lie in (0, 1], got {step}")
        n = int(np.floor(1.0 / step + 1e-9))
        values = [min(round(i * step, 12), 1.0) for i in range(n + 1)]
        return cls(tuple(Threshold(v) for v in values))


@dataclass(frozen=True)
class FoldSpec:
    """Assignment of every image id to one of ``n_folds`` folds."""

    n_folds: int
    assignment: Mapping[str, int]

    def __post_init__(self) -> None:
        if self.n_folds < 1:
            raise ValueError(f"need at least one fold, got {self.n_folds}")
        for image_id, fold in self.assignment.items():
            if not 0 <= fold < self.n_folds:
                raise ValueError(
                    f"image {image_id!r} assigned to fold {fold}, valid range is "
                    f"[0, {self.n_folds})"
                )
        object.__setattr__(self, "assignment", dict(self.assignment))

    def fold_ids(self, fold: int) -> list[str]:
        return sorted(i for i, f in self.assignment.items() if f == fold)

    @classmethod
    def shuffled(cls, image_ids: Iterable[str], n_folds: int, seed: int) -> "FoldSpec":
        """Seeded shuffle of the sorted ids, dealt round-robin into folds."""
        order = sorted(image_ids)
        random.Random(seed).shuffle(order)
        return cls(n_folds, {image_id: i % n_folds for i, image_id in enumerate(order)})


@dataclass(frozen=True, eq=False)
class SearchResult:
    """Argmax configuration plus the full train-score surface."""

    best_config: EnsembleConfig
    train_score: ScorePair
    objective: Objective
    grid: ThresholdGrid
    score_surface: np.ndarray  # shape (len(grid),) * n_members

    def __post_init__(self) -> None:
        surface = np.asarray(self.score_surface, dtype=np.float64)
        n_members = len(self.best_config.member_ids)
        expected = (len(self.grid),) * n_members
        if surface.shape != expected:
            raise ValueError(f"surface shape {surface.shape} does not match {expected}")
        if self.objective_at_best() < surface.max():
            raise ValueError("best config does not hold the maximal surface cell")
        surface.setflags(write=False)
        object.__setattr__(self, "score_surface", surface)

    def objective_at_best(self) -> float:
        return self.train_score.dsc if self.objective is Objective.DSC else self.train_score.miou

    def best_cell_index(self) -> tuple[int, ...]:
        grid_values = [t.value for t in self.grid.values]
        return tuple(grid_values.index(t.value) for t in self.best_config.thresholds)


@dataclass(frozen=True)
class EvalReport:
    """Per-fold validation scores with their mean and spread."""

    per_fold: Mapping[int, ScorePair]
    mean: ScorePair
    variation_dsc: float
    variation_miou: float
    config_per_fold: Mapping[int, EnsembleConfig]

    def __post_init__(self) -> None:
        folds = sorted(self.per_fold)
        if folds != sorted(self.config_per_fold):
            raise ValueError("per_fold and config_per_fold cover different folds")
        dscs = np.array([self.per_fold[k].dsc for k in folds])
        mious = np.array([self.per_fold[k].miou for k in folds])
        if abs(self.mean.dsc - float(np.mean(dscs))) > 1e-12:
            raise ValueError("mean DSC is not the arithmetic mean of the folds")
        if abs(self.mean.miou - float(np.mean(mious))) > 1e-12:
            raise ValueError("mean mIoU is not the arithmetic mean of the folds")
        if self.variation_dsc < 0.0 or self.variation_miou < 0.0:
            raise ValueError("variation must be non-negative")
        object.__setattr__(self, "per_fold", dict(self.per_fold))
        object.__setattr__(self, "config_per_fold", dict(self.config_per_fold))


def _stack_scores(gt: np.ndarray, pred: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-image DSC and mIoU for stacked (n, h, w) boolean masks.

    Must agree bit for bit with the scalar metrics module: same float64
    arithmetic on the same integer counts.
    """
    npix = gt.shape[1] * gt.shape[2]
    inter = np.count_nonzero(gt & pred, axis=(1, 2)).astype(np.float64)
    g = np.count_nonzero(gt, axis=(1, 2)).astype(np.float64)
    p = np.count_nonzero(pred, axis=(1, 2)).astype(np.float64)

    total = g + p
    dsc = np.where(total == 0.0, 1.0, 2.0 * inter / np.where(total == 0.0, 1.0, total))

    union_fg = total - inter
    iou_fg = np.where(union_fg == 0.0, 1.0, inter / np.where(union_fg == 0.0, 1.0, union_fg))
    inter_bg = npix - union_fg
    union_bg = npix - inter
    iou_bg = np.where(union_bg == 0.0, 1.0, inter_bg / np.where(union_bg == 0.0, 1.0, union_bg))
    miou = (iou_bg + iou_fg) / 2.0
    return dsc, miou


def _gather(corpus: Corpus, image_ids: Sequence[str], members: Sequence[str]):
    """Stack ground truth and per-member maps for a deterministic id order."""
    ids = sorted(image_ids)
    if not ids:
        raise ValueError("image subset is empty")
    if len(set(members)) != len(members) or not members:
        raise ValueError(f"members must be non-empty and unique, got {members!r}")
    for image_id in ids:
        if image_id not in corpus:
            raise ValueError(f"image {image_id!r} is not in the corpus")
        sample = corpus[image_id]
        for m in members:
            if m not in sample.maps:
                raise ValueError(f"image {image_id!r} has no map for member {m!r}")
    gt = np.stack([corpus[i].gt.values for i in ids])
    maps = {
        m: np.stack([corpus[i].maps[m].values for i in ids]).astype(np.float64)
        for m in members
    }
    return ids, gt, maps


def search(
    corpus: Corpus,
    image_ids: Sequence[str] | None,
    members: Sequence[str],
    op: EnsembleOp,
    grid: ThresholdGrid | None = None,
    objective: Objective = Objective.DSC,
    jobs: int = 1,
) -> SearchResult:
    """Score every threshold tuple on the given train subset, return the argmax.

    Ties break to the lexicographically smallest tuple. Each member map is
    binarized once per grid value and the boolean stacks are reused across
    cells, so the number of binarizations is |grid| * members, not
    |grid|^members.
    """
    grid = grid or ThresholdGrid.default()
    members = list(members)
    if image_ids is None:
        image_ids = list(corpus)
    ids, gt, maps = _gather(corpus, image_ids, members)

    # per (member, threshold) binarized stacks and their per-image counts
    binarized = {
        m: np.stack([maps[m] > t.value for t in grid.values]) for m in members
    }
    counts = {m: np.count_nonzero(binarized[m], axis=(2, 3)) for m in members}

    n = len(grid)
    shape = (n,) * len(members)
    dsc_surface = np.empty(shape, dtype=np.float64)
    miou_surface = np.empty(shape, dtype=np.float64)
    n_images = gt.shape[0]

    def eval_cell(cell: tuple[int, ...]) -> tuple[float, float]:
        stacks = [binarized[m][cell[i]] for i, m in enumerate(members)]
        if op is EnsembleOp.OR:
            pred = stacks[0]
            for s in stacks[1:]:
                pred = pred | s
        elif op is EnsembleOp.AND:
            pred = stacks[0]
            for s in stacks[1:]:
                pred = pred & s
        else:
            per_member = np.stack([counts[m][cell[i]] for i, m in enumerate(members)])
            if op is EnsembleOp.MIN:
                chosen = np.argmin(per_member, axis=0)  # first min: lowest index
            else:
                chosen = np.argmax(per_member, axis=0)
            pred = np.stack(stacks)[chosen, np.arange(n_images)]
        d, m = _stack_scores(gt, pred)
        return float(np.mean(d)), float(np.mean(m))

    cells = list(itertools.product(range(n), repeat=len(members)))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(eval_cell, cells))
    else:
        results = [eval_cell(c) for c in cells]
    for cell, (d, m) in zip(cells, results):
        dsc_surface[cell] = d
        miou_surface[cell] = m

    surface = dsc_surface if objective is Objective.DSC else miou_surface
    flat_best = int(np.argmax(surface))  # first max in C order = lexicographic tie-break
    best_cell = np.unravel_index(flat_best, shape)
    best_config = EnsembleConfig(
        member_ids=tuple(members),
        thresholds=tuple(grid.values[i] for i in best_cell),
        op=op,
    )
    return SearchResult(
        best_config=best_config,
        train_score=ScorePair(
            dsc=float(dsc_surface[best_cell]), miou=float(miou_surface[best_cell])
        ),
        objective=objective,
        grid=grid,
        score_surface=surface,
    )


def evaluate(
    corpus: Corpus,
    image_ids: Sequence[str] | None,
    config: EnsembleConfig,
) -> ScorePair:
    """Mean per-image DSC and mIoU of the configured ensemble on a subset."""
    members = list(config.member_ids)
    if image_ids is None:
        image_ids = list(corpus)
    ids, gt, maps = _gather(corpus, image_ids, members)
    stacks = [
        maps[m] > t.value for m, t in zip(members, config.thresholds)
    ]
    if config.op is EnsembleOp.OR:
        pred = stacks[0]
        for s in stacks[1:]:
            pred = pred | s
    elif config.op is EnsembleOp.AND:
        pred = stacks[0]
        for s in stacks[1:]:
            pred = pred & s
    else:
        per_member = np.stack([np.count_nonzero(s, axis=(1, 2)) for s in stacks])
        if config.op is EnsembleOp.MIN:
            chosen = np.argmin(per_member, axis=0)
        else:
            chosen = np.argmax(per_member, axis=0)
        pred = np.stack(stacks)[chosen, np.arange(gt.shape[0])]
    d, m = _stack_scores(gt, pred)
    return ScorePair(dsc=float(np.mean(d)), miou=float(np.mean(m)))


def empty_baseline(corpus: Corpus, image_ids: Sequence[str] | None = None) -> ScorePair:
    """Scores of the degenerate predictor that outputs an empty mask everywhere."""
    if image_ids is None:
        image_ids = list(corpus)
    ids = sorted(image_ids)
    if not ids:
        raise ValueError("image subset is empty")
    dscs = []
    mious = []
    for image_id in ids:
        gt = corpus[image_id].gt
        empty = BinaryMask(np.zeros(gt.shape, dtype=bool))
        pair = score_pair(gt, empty)
        dscs.append(pair.dsc)
        mious.append(pair.miou)
    return ScorePair(
        dsc=float(np.mean(np.array(dscs))), miou=float(np.mean(np.array(mious)))
    )


def cross_validate(
    corpus: Corpus,
    folds: FoldSpec,
    members: Sequence[str],
    op: EnsembleOp,
    grid: ThresholdGrid | None = None,
    objective: Objective = Objective.DSC,
    jobs: int = 1,
) -> EvalReport:
    """Calibrate on all-but-one fold, evaluate on the held-out fold, cycle.

    The validation fold never enters its own search: the train subset is the
    complement of the fold under the given assignment.
    """
    if folds.n_folds < 2:
        raise ValueError("cross-validation needs at least 2 folds")
    missing = sorted(set(corpus) - set(folds.assignment))
    if missing:
        raise ValueError(f"images without fold assignment: {missing[:3]}")
    per_fold: Dict[int, ScorePair] = {}
    config_per_fold: Dict[int, EnsembleConfig] = {}
    for k in range(folds.n_folds):
        val_ids = [i for i in corpus if folds.assignment[i] == k]
        train_ids = [i for i in corpus if folds.assignment[i] != k]
        if not val_ids:
            raise ValueError(f"fold {k} is empty")
        if not train_ids:
            raise ValueError(f"fold {k} leaves an empty train set")
        result = search(corpus, train_ids, members, op, grid, objective, jobs=jobs)
        per_fold[k] = evaluate(corpus, val_ids, result.best_config)
        config_per_fold[k] = result.best_config

    dscs = np.array([per_fold[k].dsc for k in sorted(per_fold)])
    mious = np.array([per_fold[k].miou for k in sorted(per_fold)])
    mean = ScorePair(dsc=float(np.mean(dscs)), miou=float(np.mean(mious)))
    return EvalReport(
        per_fold=per_fold,
        mean=mean,
        variation_dsc=float(np.max(np.abs(dscs - mean.dsc))),
        variation_miou=float(np.max(np.abs(mious - mean.miou))),
        config_per_fold=config_per_fold,
    )


def _format_threshold(t: Threshold) -> str:
    return format(t.value, "g")


def export_heatmap(result: SearchResult, path) -> None:
    """Write the score surface as CSV.

    Two members: a grid with threshold labels on the first row and column,
    rows indexed by the first member's threshold. One member: a single
    labelled row. More members: a flat table with one threshold tuple per row.
    Cells carry four decimals.
    """
    members = result.best_config.member_ids
    labels = [_format_threshold(t) for t in result.grid.values]
    rows: list[list[str]] = []
    if len(members) == 2:
        rows.append([""] + labels)
        for i, row_label in enumerate(labels):
            rows.append(
                [row_label] + [f"{result.score_surface[i, j]:.4f}" for j in range(len(labels))]
            )
    elif len(members) == 1:
        rows.append([""] + labels)
        rows.append(
            [members[0]] + [f"{v:.4f}" for v in result.score_surface]
        )
    else:
        rows.append(list(members) + [result.objective.value])
        for cell in itertools.product(range(len(result.grid)), repeat=len(members)):
            rows.append(
                [labels[i] for i in cell] + [f"{result.score_surface[cell]:.4f}"]
            )
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    atomic_write_text(path, buf.getvalue())
