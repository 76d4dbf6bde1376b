"""Manifest files: the JSON index binding images, maps and folds together.

A manifest is a UTF-8 JSON document with a versioned ``schema`` field. Paths
are stored relative to the manifest file so a corpus directory can be moved
wholesale. ``read_manifest`` validates structure and path existence;
``load_corpus`` reads every referenced file and cross-checks dimensions and
the stored ground-truth-emptiness flags against the actual masks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from . import formats
from ._fsio import atomic_write_text
from .calibration import FoldSpec
from .corpus import Corpus, Sample

SCHEMA = "camcal-manifest/1"


class ManifestError(ValueError):
    """Structurally invalid or inconsistent manifest."""


@dataclass(frozen=True)
class ManifestEntry:
    gt_path: Path
    map_paths: Mapping[str, Path]
    fold: int
    gt_empty: bool


@dataclass(frozen=True)
class Manifest:
    root: Path
    models: tuple[str, ...]
    height: int
    width: int
    n_folds: int
    entries: Mapping[str, ManifestEntry]

    def fold_spec(self) -> FoldSpec:
        return FoldSpec(
            self.n_folds, {i: e.fold for i, e in self.entries.items()}
        )


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ManifestError(message)


def read_manifest(path) -> Manifest:
    """Load and validate a manifest; paths must exist, models must be covered."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ManifestError(f"manifest not found: {path}")
    except json.JSONDecodeError as e:
        raise ManifestError(f"{path}: not valid JSON ({e})")

    _require(isinstance(doc, dict), f"{path}: top level must be an object")
    _require(doc.get("schema") == SCHEMA,
             f"{path}: unsupported schema {doc.get('schema')!r}, expected {SCHEMA!r}")

    models = doc.get("models")
    _require(isinstance(models, list) and models and all(isinstance(m, str) for m in models),
             f"{path}: 'models' must be a non-empty list of strings")
    _require(len(set(models)) == len(models), f"{path}: duplicate model ids")

    dims = doc.get("dims")
    _require(isinstance(dims, dict) and "height" in dims and "width" in dims,
             f"{path}: 'dims' must carry height and width")
    height, width = int(dims["height"]), int(dims["width"])
    _require(height >= 1 and width >= 1, f"{path}: dims must be >= 1")

    images = doc.get("images")
    _require(isinstance(images, dict) and images, f"{path}: 'images' must be a non-empty object")

    declared_folds = doc.get("n_folds")
    root = path.parent
    entries: dict[str, ManifestEntry] = {}
    max_fold = 0
    for image_id, rec in images.items():
        _require(isinstance(rec, dict), f"{path}: image {image_id!r} must be an object")
        for key in ("gt", "maps", "fold", "gt_empty"):
            _require(key in rec, f"{path}: image {image_id!r} is missing {key!r}")
        gt_path = root / rec["gt"]
        _require(gt_path.is_file(), f"{path}: ground truth missing on disk: {gt_path}")
        maps = rec["maps"]
        _require(isinstance(maps, dict), f"{path}: image {image_id!r} 'maps' must be an object")
        for m in models:
            _require(m in maps, f"{path}: image {image_id!r} has no map for model {m!r}")
        _require(set(maps) == set(models),
                 f"{path}: image {image_id!r} lists maps for undeclared models")
        map_paths = {}
        for m, rel in maps.items():
            p = root / rel
            _require(p.is_file(), f"{path}: map missing on disk: {p}")
            map_paths[m] = p
        fold = rec["fold"]
        _require(isinstance(fold, int) and fold >= 0,
                 f"{path}: image {image_id!r} fold must be a non-negative integer")
        if declared_folds is not None:
            _require(fold < int(declared_folds),
                     f"{path}: image {image_id!r} fold {fold} out of range "
                     f"[0, {declared_folds})")
        max_fold = max(max_fold, fold)
        entries[image_id] = ManifestEntry(
            gt_path=gt_path,
            map_paths=map_paths,
            fold=fold,
            gt_empty=bool(rec["gt_empty"]),
        )

    n_folds = int(declared_folds) if declared_folds is not None else max_fold + 1
    return Manifest(
        root=root,
        models=tuple(models),
        height=height,
        width=width,
        n_folds=n_folds,
        entries=entries,
    )


def load_corpus(manifest: Manifest) -> Corpus:
    """Read every mask and map in the manifest into memory.

    Raises ManifestError on the first dimension mismatch or on a ground
    truth whose emptiness contradicts the manifest flag.
    """
    corpus: Corpus = {}
    expected = (manifest.height, manifest.width)
    for image_id, entry in manifest.entries.items():
        gt = formats.read_mask(entry.gt_path)
        if gt.shape != expected:
            raise ManifestError(
                f"{entry.gt_path}: dimensions {gt.shape} do not match manifest {expected}"
            )
        if gt.is_empty() != entry.gt_empty:
            raise ManifestError(
                f"{entry.gt_path}: gt_empty flag says {entry.gt_empty}, mask disagrees"
            )
        maps = {}
        for m, p in entry.map_paths.items():
            logit_map = formats.read_map(p)
            if logit_map.shape != expected:
                raise ManifestError(
                    f"{p}: dimensions {logit_map.shape} do not match manifest {expected}"
                )
            maps[m] = logit_map
        corpus[image_id] = Sample(gt=gt, maps=maps)
    return corpus


def write_manifest(
    path,
    models: list[str],
    height: int,
    width: int,
    n_folds: int,
    images: dict,
    run_echo: dict | None = None,
) -> None:
    """Serialize a manifest document (image records already relative paths)."""
    doc = {
        "schema": SCHEMA,
        "dims": {"height": height, "width": width},
        "models": list(models),
        "n_folds": n_folds,
        "images": images,
    }
    if run_echo is not None:
        doc["run"] = run_echo
    atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def write_corpus(
    corpus: Corpus,
    out_dir,
    folds: FoldSpec,
    run_echo: dict | None = None,
) -> Path:
    """Write a corpus to disk in the canonical layout and return the manifest path.

    Layout: ``gt/<id>.msk`` for ground truths, ``maps/<model>/<id>.msk`` for
    per-model maps, ``manifest.json`` at the top.
    """
    out_dir = Path(out_dir)
    ids = sorted(corpus)
    if not ids:
        raise ValueError("corpus is empty")
    models = sorted(corpus[ids[0]].maps)
    first = corpus[ids[0]].gt.shape

    images = {}
    for image_id in ids:
        sample = corpus[image_id]
        if sample.gt.shape != first:
            raise ValueError(
                f"image {image_id!r} has shape {sample.gt.shape}, expected {first}"
            )
        if sorted(sample.maps) != models:
            raise ValueError(f"image {image_id!r} does not cover models {models}")
        gt_rel = f"gt/{image_id}.msk"
        formats.write_mask(sample.gt, out_dir / gt_rel)
        map_rels = {}
        for m in models:
            rel = f"maps/{m}/{image_id}.msk"
            formats.write_map(sample.maps[m], out_dir / rel)
            map_rels[m] = rel
        images[image_id] = {
            "gt": gt_rel,
            "maps": map_rels,
            "fold": folds.assignment[image_id],
            "gt_empty": sample.gt.is_empty(),
        }

    path = out_dir / "manifest.json"
    write_manifest(
        path,
        models=models,
        height=first[0],
        width=first[1],
        n_folds=folds.n_folds,
        images=images,
        run_echo=run_echo,
    )
    return path
