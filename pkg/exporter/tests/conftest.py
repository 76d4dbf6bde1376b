from pathlib import Path

import numpy as np
import pytest
import torch
from PIL import Image

from cam_exporter.demo_net import TinyNet

TARGET_LAYER = "features.4"


@pytest.fixture(scope="session")
def checkpoint(tmp_path_factory) -> Path:
    torch.manual_seed(1234)
    model = TinyNet(in_channels=1, n_classes=2)
    path = tmp_path_factory.mktemp("ckpt") / "tinynet.pt"
    torch.save(model, path)
    return path


def make_images(out_dir: Path, n: int, size: int = 48, seed: int = 0) -> list[Path]:
    """Grayscale PNGs with a bright blob on a noisy background."""
    rng = np.random.default_rng(seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(n):
        arr = rng.integers(0, 80, (size, size), dtype=np.uint8)
        cy, cx = rng.integers(12, size - 12, 2)
        r = int(rng.integers(5, 10))
        ys, xs = np.ogrid[:size, :size]
        blob = (ys - cy) ** 2 + (xs - cx) ** 2 <= r * r
        arr[blob] = 220
        path = out_dir / f"img_{i}.png"
        Image.fromarray(arr, mode="L").save(path)
        paths.append(path)
    return paths


@pytest.fixture(scope="session")
def image_files(tmp_path_factory) -> list[Path]:
    return make_images(tmp_path_factory.mktemp("images"), 5)
