#!/usr/bin/env python3
"""Desk-scale benchmark: singles vs. every ensemble operator on synthetic data.

Generates the default synthetic corpus (or one from a spec file), runs the
empty baseline, each single model and all four ensemble operators through
3-fold cross-validation, prints a comparison table and writes the per-run
reports plus the AND-ensemble train heatmap into the output directory.
"""

import argparse
import json
import sys
import time
from pathlib import Path

from camcal import (
    EnsembleOp,
    FoldSpec,
    SynthSpec,
    cross_validate,
    empty_baseline,
    export_heatmap,
    generate,
    search,
)


def pct(x: float) -> str:
    return f"{100.0 * x:5.1f}"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--spec", default=None, help="synth spec JSON (default: built-in)")
    parser.add_argument("--folds", type=int, default=3)
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--out", default="benchmark_out", help="output directory")
    args = parser.parse_args()

    if args.spec:
        spec = SynthSpec.from_dict(json.loads(Path(args.spec).read_text(encoding="utf-8")))
    else:
        spec = SynthSpec.default()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    t0 = time.monotonic()
    corpus = generate(spec)
    members = [m.name for m in spec.models]
    folds = FoldSpec.shuffled(corpus.keys(), args.folds, seed=spec.seed)
    print(f"corpus: {len(corpus)} images {spec.height}x{spec.width}, "
          f"models: {', '.join(members)}, seed {spec.seed}")

    rows = []
    base = empty_baseline(corpus)
    rows.append(("empty baseline", base.dsc, 0.0, base.miou, 0.0))

    reports = {}
    for member in members:
        rep = cross_validate(corpus, folds, [member], EnsembleOp.AND, jobs=args.jobs)
        reports[member] = rep
        rows.append((member, rep.mean.dsc, rep.variation_dsc, rep.mean.miou, rep.variation_miou))

    if len(members) >= 2:
        for op in EnsembleOp:
            rep = cross_validate(corpus, folds, members, op, jobs=args.jobs)
            reports[f"ensemble_{op.value}"] = rep
            rows.append((f"ensemble '{op.value}'", rep.mean.dsc, rep.variation_dsc,
                         rep.mean.miou, rep.variation_miou))

        # train-set heatmap for the AND operator over the whole corpus
        result = search(corpus, None, members, EnsembleOp.AND, jobs=args.jobs)
        export_heatmap(result, out_dir / "and_train_heatmap.csv")

    print()
    print(f"{'method':24s} {'DSC':>5s} {'+/-':>5s} {'mIoU':>5s} {'+/-':>5s}")
    for name, d, dv, m, mv in rows:
        print(f"{name:24s} {pct(d)} {pct(dv)} {pct(m)} {pct(mv)}")

    for name, rep in reports.items():
        doc = {
            "per_fold": {str(k): {"dsc": v.dsc, "miou": v.miou} for k, v in rep.per_fold.items()},
            "mean": {"dsc": rep.mean.dsc, "miou": rep.mean.miou},
            "variation": {"dsc": rep.variation_dsc, "miou": rep.variation_miou},
            "config_per_fold": {str(k): c.to_dict() for k, c in rep.config_per_fold.items()},
        }
        (out_dir / f"report_{name}.json").write_text(
            json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    print(f"\nreports and heatmap in {out_dir} ({time.monotonic() - t0:.1f}s)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
