"""A small reference classifier for smoke tests and checkpoint examples.

Checkpoints for the exporter are whole pickled modules (``torch.save(model,
path)``) or TorchScript archives; this net documents the expected shape of
such a checkpoint and gives the tests something cheap to run.
"""

from __future__ import annotations

import torch
from torch import nn


class TinyNet(nn.Module):
    """Conv stack with a named final convolutional layer ("features.4")."""

    def __init__(self, in_channels: int = 1, n_classes: int = 2):
        super().__init__()
        self.features = nn.Sequential(
            nn.Conv2d(in_channels, 8, 3, padding=1),
            nn.ReLU(),
            nn.MaxPool2d(2),
            nn.Conv2d(8, 12, 3, padding=1),
            nn.Conv2d(12, 12, 3, padding=1),  # features.4: the CAM target
            nn.ReLU(),
        )
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.head = nn.Linear(12, n_classes)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        z = self.features(x)
        z = self.pool(z).flatten(1)
        return self.head(z)
