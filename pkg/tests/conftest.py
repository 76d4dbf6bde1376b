import numpy as np
import pytest

from camcal import BinaryMask, LogitMap, ModelProfile, SynthSpec, generate


def random_map(rng, h=16, w=16) -> LogitMap:
    return LogitMap(rng.random((h, w)))

def random_mask(rng, h=16, w=16, p=0.5) -> BinaryMask:
    return BinaryMask(rng.random((h, w)) < p)

def is_subset(inner: BinaryMask, outer: BinaryMask) -> bool:
    return bool(np.all(outer.values | ~inner.values))


def small_spec(seed=7, n=48) -> SynthSpec:
    """A fast two-model corpus for search and CLI tests."""
    return SynthSpec(
        n_images=n,
        height=32,
        width=32,
        empty_fraction=0.25,
        radius_range=(4.0, 8.0),
        models=(
            ModelProfile("model_a", bias=(2.0, 2.0), dilation=1.0, noise=0.08, smoothing=1.0),
            ModelProfile("model_b", bias=(-2.0, -2.0), dilation=1.0, noise=0.08, smoothing=1.0),
        ),
        seed=seed,
    )


@pytest.fixture(scope="session")
def small_corpus():
    return generate(small_spec())
