import csv
import itertools

import numpy as np
import pytest

from camcal import (
    BinaryMask,
    EnsembleConfig,
    EnsembleOp,
    EvalReport,
    FoldSpec,
    LogitMap,
    Objective,
    Sample,
    ScorePair,
    Threshold,
    ThresholdGrid,
    combine,
    cross_validate,
    dsc,
    empty_baseline,
    evaluate,
    export_heatmap,
    miou,
    accumulate,
    search,
)

def surface_oracle(corpus, ids, members, op, grid, objective):
    """Re-evaluate every cell through the public per-image path."""
    ids = sorted(ids)
    shape = (len(grid.values),) * len(members)
    surface = np.empty(shape)
    for cell in itertools.product(range(len(grid.values)), repeat=len(members)):
        config = EnsembleConfig(
            member_ids=tuple(members),
            thresholds=tuple(grid.values[i] for i in cell),
            op=op,
        )
        vals = []
        for image_id in ids:
            sample = corpus[image_id]
            pred = combine([sample.maps[m] for m in members], config)
            if objective is Objective.DSC:
                vals.append(dsc(sample.gt, pred))
            else:
                vals.append(miou(accumulate(sample.gt, pred)))
        surface[cell] = np.mean(np.array(vals))
    return surface


class TestThresholdGrid:
    def test_default_has_11_values(self):
        grid = ThresholdGrid.default()
        assert [t.value for t in grid.values] == [i / 10 for i in range(11)]

    def test_from_step(self):
        assert [t.value for t in ThresholdGrid.from_step(0.25).values] == [0.0, 0.25, 0.5, 0.75, 1.0]

    def test_step_validation(self):
        with pytest.raises(ValueError):
            ThresholdGrid.from_step(0.0)

    def test_must_increase(self):
        with pytest.raises(ValueError):
            ThresholdGrid((Threshold(0.5), Threshold(0.5)))


class TestFoldSpec:
    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            FoldSpec(2, {"a": 2})

    def test_shuffled_is_deterministic_and_balanced(self):
        ids = [f"i{k}" for k in range(10)]
        f1 = FoldSpec.shuffled(ids, 3, seed=9)
        f2 = FoldSpec.shuffled(ids, 3, seed=9)
        assert f1.assignment == f2.assignment
        sizes = [len(f1.fold_ids(k)) for k in range(3)]
        assert sorted(sizes) == [3, 3, 4]
        assert FoldSpec.shuffled(ids, 3, seed=10).assignment != f1.assignment


def two_image_corpus():
    m1 = LogitMap(np.array([[0.9, 0.1], [0.6, 0.2]]))
    m2 = LogitMap(np.array([[0.8, 0.7], [0.1, 0.3]]))
    gt = BinaryMask(np.array([[True, False], [True, False]]))
    return {
        "x": Sample(gt=gt, maps={"a": m1, "b": m2}),
        "y": Sample(gt=BinaryMask(np.array([[True, True], [False, False]])),
                    maps={"a": m2, "b": m1}),
    }


class TestSearch:
    def test_singleton_grid_single_member(self):
        corpus = two_image_corpus()
        grid = ThresholdGrid((Threshold(0.5),))
        result = search(corpus, None, ["a"], EnsembleOp.OR, grid)
        assert result.score_surface.shape == (1,)
        assert result.best_config.thresholds == (Threshold(0.5),)

    def test_two_members_default_grid_has_121_cells(self):
        result = search(two_image_corpus(), None, ["a", "b"], EnsembleOp.AND)
        assert result.score_surface.size == 121
        assert result.score_surface.shape == (11, 11)

    def test_surface_matches_per_image_oracle(self, small_corpus):
        ids = sorted(small_corpus)[:24]
        grid = ThresholdGrid.from_step(0.2)
        for objective in Objective:
            result = search(small_corpus, ids, ["model_a", "model_b"],
                            EnsembleOp.AND, grid, objective)
            expected = surface_oracle(small_corpus, ids, ["model_a", "model_b"],
                                      EnsembleOp.AND, grid, objective)
            assert np.array_equal(result.score_surface, expected)
            best = np.unravel_index(int(np.argmax(expected)), expected.shape)
            assert result.best_config.thresholds == tuple(grid.values[i] for i in best)

    def test_min_max_ops_match_oracle(self, small_corpus):
        ids = sorted(small_corpus)[:12]
        grid = ThresholdGrid.from_step(0.5)
        for op in (EnsembleOp.MIN, EnsembleOp.MAX, EnsembleOp.OR):
            result = search(small_corpus, ids, ["model_a", "model_b"], op, grid)
            expected = surface_oracle(small_corpus, ids, ["model_a", "model_b"],
                                      op, grid, Objective.DSC)
            assert np.array_equal(result.score_surface, expected)

    def test_tie_break_lexicographic(self):
        # a map with no values in (0, 0.5] makes thresholds 0.0..0.5 identical
        m = LogitMap(np.array([[0.9, 0.0], [0.9, 0.0]]))
        gt = BinaryMask(np.array([[True, False], [True, False]]))
        corpus = {"only": Sample(gt=gt, maps={"a": m})}
        result = search(corpus, None, ["a"], EnsembleOp.OR)
        assert result.best_config.thresholds == (Threshold(0.0),)
        assert result.train_score.dsc == 1.0

    def test_worker_counts_bit_identical(self, small_corpus):
        ids = sorted(small_corpus)[:20]
        results = [
            search(small_corpus, ids, ["model_a", "model_b"], EnsembleOp.AND,
                   ThresholdGrid.from_step(0.2), jobs=jobs)
            for jobs in (1, 4)
        ]
        assert np.array_equal(results[0].score_surface, results[1].score_surface)
        assert results[0].best_config == results[1].best_config
        assert results[0].train_score == results[1].train_score

    def test_all_ones_cell_equals_empty_baseline(self, small_corpus):
        ids = sorted(small_corpus)[:30]
        baseline = empty_baseline(small_corpus, ids)
        for op in EnsembleOp:
            result = search(small_corpus, ids, ["model_a", "model_b"], op)
            assert result.score_surface[-1, -1] == baseline.dsc

    def test_missing_member_map_rejected(self):
        corpus = two_image_corpus()
        with pytest.raises(ValueError):
            search(corpus, None, ["a", "nope"], EnsembleOp.AND)

    def test_empty_train_set_rejected(self):
        with pytest.raises(ValueError):
            search(two_image_corpus(), [], ["a"], EnsembleOp.AND)


class TestEvaluate:
    def test_perfect_config_scores_one(self):
        gt = BinaryMask(np.array([[True, False], [False, False]]))
        m = LogitMap(np.array([[1.0, 0.0], [0.0, 0.0]]))
        corpus = {"i": Sample(gt=gt, maps={"a": m})}
        config = EnsembleConfig(("a",), (Threshold(0.5),), EnsembleOp.OR)
        pair = evaluate(corpus, None, config)
        assert pair.dsc == 1.0 and pair.miou == 1.0

    def test_single_image_equals_metrics(self, small_corpus):
        image_id = sorted(small_corpus)[0]
        config = EnsembleConfig(
            ("model_a", "model_b"), (Threshold(0.4), Threshold(0.6)), EnsembleOp.AND
        )
        pair = evaluate(small_corpus, [image_id], config)
        sample = small_corpus[image_id]
        pred = combine([sample.maps["model_a"], sample.maps["model_b"]], config)
        assert pair.dsc == dsc(sample.gt, pred)
        assert pair.miou == miou(accumulate(sample.gt, pred))

    def test_all_empty_predictions_score_empty_fraction(self, small_corpus):
        config = EnsembleConfig(
            ("model_a", "model_b"), (Threshold(1.0), Threshold(1.0)), EnsembleOp.OR
        )
        pair = evaluate(small_corpus, None, config)
        f = np.mean([1.0 if s.gt.is_empty() else 0.0 for s in small_corpus.values()])
        assert pair.dsc == pytest.approx(float(f), abs=1e-12)


class TestEmptyBaseline:
    def test_all_nonempty_gives_zero_dsc(self):
        gt = BinaryMask(np.array([[True, False]]))
        corpus = {"i": Sample(gt=gt, maps={})}
        assert empty_baseline(corpus).dsc == 0.0

    def test_all_empty_gives_one(self):
        gt = BinaryMask(np.zeros((2, 2), dtype=bool))
        corpus = {"i": Sample(gt=gt, maps={})}
        pair = empty_baseline(corpus)
        assert pair.dsc == 1.0 and pair.miou == 1.0


def replicated_fold_corpus():
    """Three folds with identical contents (same data under different ids)."""
    base = two_image_corpus()
    corpus = {}
    assignment = {}
    for k in range(3):
        for image_id, sample in base.items():
            new_id = f"f{k}_{image_id}"
            corpus[new_id] = sample
            assignment[new_id] = k
    return corpus, FoldSpec(3, assignment)


class TestCrossValidate:
    def test_identical_folds_have_zero_variation(self):
        corpus, folds = replicated_fold_corpus()
        report = cross_validate(corpus, folds, ["a", "b"], EnsembleOp.AND)
        scores = list(report.per_fold.values())
        assert all(s == scores[0] for s in scores)
        assert report.variation_dsc == 0.0
        assert report.variation_miou == 0.0
        assert report.mean == scores[0]

    def test_aggregation_rule(self, small_corpus):
        folds = FoldSpec.shuffled(small_corpus.keys(), 3, seed=1)
        report = cross_validate(
            small_corpus, folds, ["model_a"], EnsembleOp.OR, ThresholdGrid.from_step(0.25)
        )
        dscs = [report.per_fold[k].dsc for k in sorted(report.per_fold)]
        assert report.mean.dsc == float(np.mean(np.array(dscs)))
        assert report.variation_dsc == pytest.approx(
            max(abs(d - report.mean.dsc) for d in dscs), abs=1e-15)

    def test_fold_isolation_by_recomputation(self, small_corpus):
        grid = ThresholdGrid.from_step(0.25)
        folds = FoldSpec.shuffled(small_corpus.keys(), 3, seed=2)
        report = cross_validate(small_corpus, folds, ["model_a", "model_b"],
                                EnsembleOp.AND, grid)
        for k in range(3):
            train_ids = [i for i in small_corpus if folds.assignment[i] != k]
            assert folds.fold_ids(k) and set(folds.fold_ids(k)).isdisjoint(train_ids)
            again = search(small_corpus, train_ids, ["model_a", "model_b"],
                           EnsembleOp.AND, grid)
            assert again.best_config == report.config_per_fold[k]

    def test_empty_fold_rejected(self):
        corpus = two_image_corpus()
        folds = FoldSpec(3, {"x": 0, "y": 1})  # fold 2 empty
        with pytest.raises(ValueError):
            cross_validate(corpus, folds, ["a"], EnsembleOp.OR)

    def test_unassigned_image_rejected(self):
        corpus = two_image_corpus()
        folds = FoldSpec(2, {"x": 0})
        with pytest.raises(ValueError):
            cross_validate(corpus, folds, ["a"], EnsembleOp.OR)


class TestEvalReport:
    def fold_scores(self):
        return {
            0: ScorePair(0.68, 0.5),
            1: ScorePair(0.70, 0.5),
            2: ScorePair(0.72, 0.5),
        }

    def test_hand_arithmetic(self):
        per_fold = self.fold_scores()
        report = EvalReport(
            per_fold=per_fold,
            mean=ScorePair(0.70, 0.5),
            variation_dsc=0.02,
            variation_miou=0.0,
            config_per_fold={k: EnsembleConfig(("a",), (Threshold(0.5),), EnsembleOp.OR)
                             for k in per_fold},
        )
        assert report.mean.dsc == pytest.approx(0.70)

    def test_wrong_mean_rejected(self):
        per_fold = self.fold_scores()
        with pytest.raises(ValueError):
            EvalReport(
                per_fold=per_fold,
                mean=ScorePair(0.75, 0.5),
                variation_dsc=0.02,
                variation_miou=0.0,
                config_per_fold={k: EnsembleConfig(("a",), (Threshold(0.5),), EnsembleOp.OR)
                                 for k in per_fold},
            )


class TestHeatmapExport:
    def test_two_member_layout(self, small_corpus, tmp_path):
        result = search(small_corpus, sorted(small_corpus)[:10],
                        ["model_a", "model_b"], EnsembleOp.AND)
        path = tmp_path / "surface.csv"
        export_heatmap(result, path)
        rows = list(csv.reader(path.read_text(encoding="utf-8").splitlines()))
        assert len(rows) == 12 and all(len(r) == 12 for r in rows)
        assert rows[0][0] == ""
        assert rows[0][1:] == [format(i / 10, "g") for i in range(11)]
        assert rows[3][0] == "0.2"
        for i in range(11):
            for j in range(11):
                assert rows[i + 1][j + 1] == f"{result.score_surface[i, j]:.4f}"

    def test_single_member_layout(self, small_corpus, tmp_path):
        result = search(small_corpus, sorted(small_corpus)[:10], ["model_a"], EnsembleOp.OR)
        path = tmp_path / "surface.csv"
        export_heatmap(result, path)
        rows = list(csv.reader(path.read_text(encoding="utf-8").splitlines()))
        assert len(rows) == 2
        assert rows[1][0] == "model_a"
        assert len(rows[1]) == 12

    def test_three_member_flat_table(self, tmp_path):
        rng = np.random.default_rng(0)
        corpus = {
            f"i{i}": Sample(
                gt=BinaryMask(rng.random((4, 4)) < 0.4),
                maps={m: LogitMap(rng.random((4, 4))) for m in ("a", "b", "c")},
            )
            for i in range(2)
        }
        grid = ThresholdGrid.from_step(0.5)
        result = search(corpus, None, ["a", "b", "c"], EnsembleOp.OR, grid)
        path = tmp_path / "surface.csv"
        export_heatmap(result, path)
        rows = list(csv.reader(path.read_text(encoding="utf-8").splitlines()))
        assert rows[0] == ["a", "b", "c", "dsc"]
        assert len(rows) == 1 + 27

    def test_constant_surface_writes_identical_cells(self, tmp_path):
        gt = BinaryMask(np.array([[True]]))
        corpus = {"i": Sample(gt=gt, maps={"a": LogitMap(np.array([[0.0]]))})}
        result = search(corpus, None, ["a"], EnsembleOp.OR)
        export_heatmap(result, tmp_path / "c.csv")
        rows = list(csv.reader((tmp_path / "c.csv").read_text().splitlines()))
        assert len(set(rows[1][1:])) == 1
