import numpy as np
import pytest
from scipy import ndimage

from camcal import (
    ModelProfile,
    SynthSpec,
    Threshold,
    binarize,
    dsc,
    generate,
)

from conftest import small_spec


def clean_spec(n=25, seed=7):
    return SynthSpec(
        n_images=n, height=64, width=64, empty_fraction=0.0,
        radius_range=(6.0, 14.0),
        models=(ModelProfile("clean"),),  # no bias, dilation, noise or smoothing
        seed=seed,
    )


class TestSpecValidation:
    def test_defaults_are_valid(self):
        spec = SynthSpec.default()
        assert spec.n_images == 600 and spec.empty_fraction == 0.3

    @pytest.mark.parametrize("kwargs", [
        dict(n_images=0),
        dict(height=4),
        dict(empty_fraction=1.5),
        dict(radius_range=(0.5, 3.0)),
        dict(radius_range=(10.0, 40.0)),
        dict(seed=-1),
    ])
    def test_invalid_specs_rejected(self, kwargs):
        base = SynthSpec.default().to_dict()
        base.update({k: list(v) if isinstance(v, tuple) else v for k, v in kwargs.items()})
        with pytest.raises(ValueError):
            SynthSpec.from_dict(base)

    def test_duplicate_model_names_rejected(self):
        with pytest.raises(ValueError):
            SynthSpec(
                n_images=2, height=16, width=16, empty_fraction=0.0,
                radius_range=(2.0, 4.0),
                models=(ModelProfile("m"), ModelProfile("m")),
                seed=0,
            )

    def test_dict_roundtrip(self):
        spec = small_spec()
        assert SynthSpec.from_dict(spec.to_dict()) == spec


class TestGenerate:
    def test_same_seed_is_byte_identical(self):
        spec = small_spec(n=16)
        c1, c2 = generate(spec), generate(spec)
        assert sorted(c1) == sorted(c2)
        for image_id in c1:
            assert np.array_equal(c1[image_id].gt.values, c2[image_id].gt.values)
            for m in c1[image_id].maps:
                a = c1[image_id].maps[m].values
                b = c2[image_id].maps[m].values
                assert a.tobytes() == b.tobytes()

    def test_different_seed_differs(self):
        a = generate(small_spec(seed=1, n=8))
        b = generate(small_spec(seed=2, n=8))
        assert any(
            not np.array_equal(a[i].gt.values, b[i].gt.values) for i in a
        )

    def test_empty_fraction_one_gives_all_empty(self):
        spec = SynthSpec(
            n_images=10, height=32, width=32, empty_fraction=1.0,
            radius_range=(4.0, 8.0),
            models=(ModelProfile("m", noise=0.1, smoothing=1.0),),
            seed=3,
        )
        corpus = generate(spec)
        assert all(s.gt.is_empty() for s in corpus.values())
        # maps are still valid logit maps (constructor would have raised otherwise)
        for s in corpus.values():
            assert s.maps["m"].shape == (32, 32)

    def test_empty_count_is_exact(self):
        corpus = generate(small_spec(n=48))  # empty_fraction 0.25
        assert sum(1 for s in corpus.values() if s.gt.is_empty()) == 12

    def test_nonempty_gt_is_single_connected_blob(self):
        corpus = generate(small_spec(n=24))
        for s in corpus.values():
            if s.gt.is_empty():
                continue
            _, n_components = ndimage.label(s.gt.values)
            assert n_components == 1

    def test_complementary_false_positives(self):
        corpus = generate(small_spec(n=48))
        t = Threshold(0.5)
        differ = total = 0
        for s in corpus.values():
            if s.gt.is_empty():
                continue
            total += 1
            fp_a = binarize(s.maps["model_a"], t).values & ~s.gt.values
            fp_b = binarize(s.maps["model_b"], t).values & ~s.gt.values
            if not np.array_equal(fp_a, fp_b):
                differ += 1
        assert differ / total >= 0.9


class TestCleanProfileOracle:
    """With zero noise, dilation and bias, the map is a plateau over the blob."""

    def test_threshold_recovers_superset_of_gt(self):
        corpus = generate(clean_spec())
        for s in corpus.values():
            for tv in (0.1, 0.5, 0.9, 0.99):
                mask = binarize(s.maps["clean"], Threshold(tv))
                assert np.all(mask.values | ~s.gt.values)  # gt subset of mask

    def test_optimal_threshold_dsc_above_095(self):
        corpus = generate(clean_spec())
        for s in corpus.values():
            best = max(
                dsc(s.gt, binarize(s.maps["clean"], Threshold(tv)))
                for tv in (0.9, 0.95, 0.99)
            )
            assert best >= 0.95
