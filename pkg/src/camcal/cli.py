"""Command-line surface for the calibration pipeline.

Subcommands cover the full flow: ``cam`` turns exported tensors into logit
maps, ``synth`` writes a synthetic corpus, ``calibrate`` searches thresholds
on a manifest, ``evaluate`` applies a saved configuration, ``crossval`` runs
the fold cycle, ``baseline`` scores the all-empty predictor and ``render``
dumps any map or mask as a portable graymap for eyeballing.

Every run echoes its effective configuration into the JSON artifacts it
writes, and all writes are atomic. Human-readable score lines print as
percentages with one decimal; files keep full precision.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, formats, manifest as manifest_mod, synth as synth_mod
from ._fsio import atomic_write_text
from .calibration import (
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
from .ensemble import EnsembleConfig, EnsembleOp
from .gradcam import GradientStack, cam_map, gradcam_weights, gradcampp_weights, smooth_average
from .metrics import ScorePair


def _pct(x: float) -> str:
    return f"{100.0 * x:.1f}"


def _run_echo(command: str, args: argparse.Namespace) -> dict:
    config = {
        k: (str(v) if isinstance(v, Path) else v)
        for k, v in sorted(vars(args).items())
        if k != "func"
    }
    return {"engine": "camcal", "version": __version__, "command": command, "config": config}


def _write_json(path, doc: dict) -> None:
    atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _score_dict(pair: ScorePair) -> dict:
    return {"dsc": pair.dsc, "miou": pair.miou}


def _load_config_file(path) -> EnsembleConfig:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if "best_config" in doc:  # accept a calibrate output file directly
        doc = doc["best_config"]
    return EnsembleConfig.from_dict(doc)


def _corpus_from_manifest(path):
    man = manifest_mod.read_manifest(path)
    return man, manifest_mod.load_corpus(man)


def _search_args(args) -> tuple[EnsembleOp, ThresholdGrid, Objective]:
    return (
        EnsembleOp.parse(args.op),
        ThresholdGrid.from_step(args.grid_step),
        Objective.parse(args.objective),
    )


def cmd_cam(args) -> int:
    n = len(args.acts)
    if len(args.grads) != n:
        raise ValueError(f"got {n} activation files but {len(args.grads)} gradient files")
    if args.variant == "gradcampp":
        if not args.grads2 or not args.grads3:
            raise ValueError("gradcampp needs --grads2 and --grads3")
        if len(args.grads2) != n or len(args.grads3) != n:
            raise ValueError("--grads2/--grads3 counts must match --acts")

    maps = []
    for i in range(n):
        acts = formats.read_stack(args.acts[i])
        if isinstance(acts, GradientStack):
            raise ValueError(f"{args.acts[i]}: expected an activation stack (order 0)")
        g1 = formats.read_stack(args.grads[i])
        if not isinstance(g1, GradientStack):
            raise ValueError(f"{args.grads[i]}: expected a gradient stack")
        out_h = args.height or acts.u
        out_w = args.width or acts.v
        if args.variant == "gradcam":
            weights = gradcam_weights(g1)
        else:
            g2 = formats.read_stack(args.grads2[i])
            g3 = formats.read_stack(args.grads3[i])
            weights = gradcampp_weights(acts, g1, g2, g3)
        maps.append(cam_map(acts, weights, out_h, out_w))

    result = maps[0] if len(maps) == 1 else smooth_average(maps)
    formats.write_map(result, args.out)
    print(f"wrote {args.out} ({result.height}x{result.width}, variant={args.variant}, samples={n})")
    return 0


def cmd_synth(args) -> int:
    if args.spec:
        spec = synth_mod.SynthSpec.from_dict(
            json.loads(Path(args.spec).read_text(encoding="utf-8"))
        )
    else:
        spec = synth_mod.SynthSpec.default()
    if args.seed is not None:
        spec = synth_mod.SynthSpec.from_dict({**spec.to_dict(), "seed": args.seed})

    corpus = synth_mod.generate(spec)
    folds = FoldSpec.shuffled(corpus.keys(), args.folds, seed=spec.seed)
    out_dir = Path(args.out)
    path = manifest_mod.write_corpus(
        corpus, out_dir, folds, run_echo=_run_echo("synth", args)
    )
    n_empty = sum(1 for s in corpus.values() if s.gt.is_empty())
    print(
        f"wrote {len(corpus)} images ({n_empty} empty), "
        f"{len(spec.models)} models, {args.folds} folds -> {path}"
    )
    return 0


def cmd_calibrate(args) -> int:
    man, corpus = _corpus_from_manifest(args.manifest)
    op, grid, objective = _search_args(args)
    result = search(
        corpus, None, args.members, op, grid, objective, jobs=args.jobs
    )
    heatmap_path = args.heatmap or Path(args.out).with_suffix(".heatmap.csv")
    export_heatmap(result, heatmap_path)
    _write_json(args.out, {
        "run": _run_echo("calibrate", args),
        "objective": objective.value,
        "grid": [t.value for t in grid.values],
        "best_config": result.best_config.to_dict(),
        "train_score": _score_dict(result.train_score),
        "surface": result.score_surface.tolist(),
        "n_images": len(corpus),
    })
    thresholds = ", ".join(f"{m}>{t.value:g}" for m, t in
                           zip(result.best_config.member_ids, result.best_config.thresholds))
    print(f"best {op.value} ensemble: {thresholds}")
    print(f"train DSC {_pct(result.train_score.dsc)}  mIoU {_pct(result.train_score.miou)}")
    print(f"wrote {args.out} and {heatmap_path}")
    return 0


def cmd_evaluate(args) -> int:
    man, corpus = _corpus_from_manifest(args.manifest)
    config = _load_config_file(args.config)
    scores = evaluate(corpus, None, config)
    doc = {
        "run": _run_echo("evaluate", args),
        "config": config.to_dict(),
        "scores": _score_dict(scores),
        "n_images": len(corpus),
    }
    if args.out:
        _write_json(args.out, doc)
    print(f"DSC {_pct(scores.dsc)}  mIoU {_pct(scores.miou)}  ({len(corpus)} images)")
    return 0


def cmd_crossval(args) -> int:
    man, corpus = _corpus_from_manifest(args.manifest)
    op, grid, objective = _search_args(args)
    if args.folds is not None:
        folds = FoldSpec.shuffled(corpus.keys(), args.folds, seed=args.seed)
    else:
        folds = man.fold_spec()
    report = cross_validate(
        corpus, folds, args.members, op, grid, objective, jobs=args.jobs
    )
    _write_json(args.out, {
        "run": _run_echo("crossval", args),
        "objective": objective.value,
        "grid": [t.value for t in grid.values],
        "n_folds": folds.n_folds,
        "per_fold": {str(k): _score_dict(v) for k, v in report.per_fold.items()},
        "mean": _score_dict(report.mean),
        "variation": {"dsc": report.variation_dsc, "miou": report.variation_miou},
        "config_per_fold": {str(k): v.to_dict() for k, v in report.config_per_fold.items()},
    })
    for k in sorted(report.per_fold):
        pair = report.per_fold[k]
        print(f"fold {k}: DSC {_pct(pair.dsc)}  mIoU {_pct(pair.miou)}")
    print(
        f"mean DSC {_pct(report.mean.dsc)} +/-{_pct(report.variation_dsc)}  "
        f"mIoU {_pct(report.mean.miou)} +/-{_pct(report.variation_miou)}"
    )
    print(f"wrote {args.out}")
    return 0


def cmd_baseline(args) -> int:
    man, corpus = _corpus_from_manifest(args.manifest)
    scores = empty_baseline(corpus)
    doc = {
        "run": _run_echo("baseline", args),
        "scores": _score_dict(scores),
        "n_images": len(corpus),
    }
    if args.out:
        _write_json(args.out, doc)
    print(f"empty baseline: DSC {_pct(scores.dsc)}  mIoU {_pct(scores.miou)}")
    return 0


def cmd_render(args) -> int:
    logit_map = formats.read_map(args.input)
    formats.write_pgm(
        logit_map.values, args.out,
        comment=f"camcal {__version__} render of {args.input}",
    )
    print(f"wrote {args.out} ({logit_map.height}x{logit_map.width})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="camcal",
        description="Threshold calibration for ensembles of CAM-style segmentations.",
    )
    parser.add_argument("--version", action="version", version=f"camcal {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cam", help="compute logit maps from exported tensor stacks")
    p.add_argument("--acts", nargs="+", required=True, help="activation stacks (TNS1, order 0)")
    p.add_argument("--grads", nargs="+", required=True, help="first-derivative stacks (TNS1)")
    p.add_argument("--grads2", nargs="*", default=None, help="second-derivative stacks")
    p.add_argument("--grads3", nargs="*", default=None, help="third-derivative stacks")
    p.add_argument("--variant", choices=["gradcam", "gradcampp"], default="gradcam")
    p.add_argument("--height", type=int, default=None, help="output height (default: stack rows)")
    p.add_argument("--width", type=int, default=None, help="output width (default: stack cols)")
    p.add_argument("--out", required=True, help="output map path (MSK1)")
    p.set_defaults(func=cmd_cam)

    p = sub.add_parser("synth", help="generate a synthetic corpus with a manifest")
    p.add_argument("--spec", default=None, help="JSON spec file (default: built-in corpus)")
    p.add_argument("--seed", type=int, default=None, help="override the spec seed")
    p.add_argument("--folds", type=int, default=3, help="fold count for the manifest")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    def add_search_flags(p):
        p.add_argument("--manifest", required=True)
        p.add_argument("--members", nargs="+", required=True, help="model ids to ensemble")
        p.add_argument("--op", choices=[op.value for op in EnsembleOp], required=True)
        p.add_argument("--grid-step", type=float, default=0.1)
        p.add_argument("--objective", choices=[o.value for o in Objective], default="dsc")
        p.add_argument("--jobs", type=int, default=1, help="worker threads for the search")

    p = sub.add_parser("calibrate", help="exhaustive threshold search on a manifest")
    add_search_flags(p)
    p.add_argument("--out", required=True, help="result JSON path")
    p.add_argument("--heatmap", default=None, help="heatmap CSV path (default: alongside --out)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("evaluate", help="apply a saved ensemble config to a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", required=True, help="config JSON (or a calibrate output file)")
    p.add_argument("--out", default=None, help="scores JSON path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("crossval", help="fold-wise calibrate/evaluate cycle")
    add_search_flags(p)
    p.add_argument("--folds", type=int, default=None,
                   help="reassign folds with a seeded shuffle instead of the manifest's")
    p.add_argument("--seed", type=int, default=0, help="seed for --folds reassignment")
    p.add_argument("--out", required=True, help="report JSON path")
    p.set_defaults(func=cmd_crossval)

    p = sub.add_parser("baseline", help="score the all-empty predictor")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", default=None, help="scores JSON path")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("render", help="dump a map or mask as a portable graymap")
    p.add_argument("input", help="MSK1 file")
    p.add_argument("--out", required=True, help="output PGM path")
    p.set_defaults(func=cmd_render)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0
    try:
        return args.func(args)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
