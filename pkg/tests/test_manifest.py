import json

import numpy as np
import pytest

from camcal import FoldSpec, generate
from camcal.formats import write_map, write_mask
from camcal.manifest import (
    SCHEMA,
    ManifestError,
    load_corpus,
    read_manifest,
    write_corpus,
)
from camcal.masks import BinaryMask, LogitMap

from conftest import small_spec


@pytest.fixture()
def corpus_dir(tmp_path):
    corpus = generate(small_spec(n=9))
    folds = FoldSpec.shuffled(corpus.keys(), 3, seed=0)
    path = write_corpus(corpus, tmp_path / "corpus", folds)
    return corpus, folds, path


def minimal_doc(tmp_path):
    write_mask(BinaryMask(np.array([[True, False]])), tmp_path / "gt.msk")
    write_map(LogitMap(np.array([[0.5, 0.5]])), tmp_path / "map.msk")
    return {
        "schema": SCHEMA,
        "dims": {"height": 1, "width": 2},
        "models": ["m"],
        "images": {
            "only": {"gt": "gt.msk", "maps": {"m": "map.msk"}, "fold": 0, "gt_empty": False},
        },
    }


def write_doc(tmp_path, doc):
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


class TestRoundTrip:
    def test_write_read_load(self, corpus_dir):
        corpus, folds, path = corpus_dir
        man = read_manifest(path)
        assert man.models == ("model_a", "model_b")
        assert man.n_folds == 3
        assert man.fold_spec().assignment == folds.assignment
        loaded = load_corpus(man)
        assert sorted(loaded) == sorted(corpus)
        for image_id in corpus:
            assert np.array_equal(loaded[image_id].gt.values, corpus[image_id].gt.values)
            for m in corpus[image_id].maps:
                assert np.array_equal(
                    loaded[image_id].maps[m].values, corpus[image_id].maps[m].values
                )

    def test_fold_indices_determine_n_folds(self, corpus_dir):
        _, _, path = corpus_dir
        doc = json.loads(path.read_text(encoding="utf-8"))
        del doc["n_folds"]
        stripped = write_doc(path.parent, doc)
        assert read_manifest(stripped).n_folds == 3


class TestValidation:
    def test_minimal_manifest_loads(self, tmp_path):
        path = write_doc(tmp_path, minimal_doc(tmp_path))
        man = read_manifest(path)
        corpus = load_corpus(man)
        assert list(corpus) == ["only"]

    def test_missing_map_file_names_path(self, tmp_path):
        doc = minimal_doc(tmp_path)
        doc["images"]["only"]["maps"]["m"] = "nope.msk"
        with pytest.raises(ManifestError, match="nope.msk"):
            read_manifest(write_doc(tmp_path, doc))

    def test_missing_model_column(self, tmp_path):
        doc = minimal_doc(tmp_path)
        doc["models"] = ["m", "m2"]
        with pytest.raises(ManifestError, match="m2"):
            read_manifest(write_doc(tmp_path, doc))

    def test_undeclared_model_rejected(self, tmp_path):
        doc = minimal_doc(tmp_path)
        doc["images"]["only"]["maps"]["extra"] = "map.msk"
        with pytest.raises(ManifestError, match="undeclared"):
            read_manifest(write_doc(tmp_path, doc))

    def test_fold_out_of_declared_range(self, tmp_path):
        doc = minimal_doc(tmp_path)
        doc["n_folds"] = 2
        doc["images"]["only"]["fold"] = 2
        with pytest.raises(ManifestError, match="out of range"):
            read_manifest(write_doc(tmp_path, doc))

    def test_bad_schema(self, tmp_path):
        doc = minimal_doc(tmp_path)
        doc["schema"] = "something/9"
        with pytest.raises(ManifestError, match="schema"):
            read_manifest(write_doc(tmp_path, doc))

    def test_missing_manifest_file(self, tmp_path):
        with pytest.raises(ManifestError, match="not found"):
            read_manifest(tmp_path / "absent.json")

    def test_gt_empty_flag_mismatch(self, tmp_path):
        doc = minimal_doc(tmp_path)
        doc["images"]["only"]["gt_empty"] = True  # mask actually has a positive
        man = read_manifest(write_doc(tmp_path, doc))
        with pytest.raises(ManifestError, match="gt_empty"):
            load_corpus(man)

    def test_dimension_mismatch_found_on_load(self, tmp_path):
        doc = minimal_doc(tmp_path)
        doc["dims"] = {"height": 2, "width": 2}
        man = read_manifest(write_doc(tmp_path, doc))
        with pytest.raises(ManifestError, match="dimensions"):
            load_corpus(man)
