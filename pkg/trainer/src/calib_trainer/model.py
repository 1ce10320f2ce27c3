"""Small convolutional backbone with four softmax classification heads."""

from __future__ import annotations

import torch
import torch.nn as nn

from .data import HEADS


class CalibNet(nn.Module):
    """Six conv layers, global average pooling, one linear head per parameter."""

    def __init__(self, head_sizes: dict[str, int]):
        super().__init__()
        chans = [3, 16, 32, 64, 96, 128, 128]
        strides = [2, 2, 2, 2, 2, 1]
        layers: list[nn.Module] = []
        for c_in, c_out, s in zip(chans[:-1], chans[1:], strides):
            layers += [nn.Conv2d(c_in, c_out, 3, stride=s, padding=1), nn.ReLU(inplace=True)]
        self.backbone = nn.Sequential(*layers)
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.heads = nn.ModuleDict(
            {name: nn.Linear(chans[-1], head_sizes[name]) for name in HEADS}
        )

    def forward(self, x: torch.Tensor) -> dict[str, torch.Tensor]:
        feat = self.pool(self.backbone(x)).flatten(1)
        return {name: head(feat) for name, head in self.heads.items()}
