"""Vision backbones for window embeddings.

``tiny`` is an in-package convolutional encoder with seeded random
weights, fast enough for toy sets on CPU. ``resnet18`` uses the
torchvision architecture; the ``-pretrained`` variant tries to load
published weights and falls back to seeded random initialization when
they are unavailable (e.g. no network), which the probe tolerates: a
frozen random projection still separates small video sets linearly.
"""

from __future__ import annotations

import hashlib
import warnings

import torch
from torch import nn

__all__ = ["build_backbone", "backbone_checksum", "set_frozen"]


class TinyEncoder(nn.Module):
    """Three conv stages plus global average pooling; 64-d embeddings."""

    def __init__(self):
        super().__init__()
        self.features = nn.Sequential(
            nn.Conv2d(3, 16, 3, stride=2, padding=1),
            nn.ReLU(),
            nn.Conv2d(16, 32, 3, stride=2, padding=1),
            nn.ReLU(),
            nn.Conv2d(32, 64, 3, stride=2, padding=1),
            nn.ReLU(),
            nn.AdaptiveAvgPool2d(1),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.features(x).flatten(1)


def build_backbone(name: str, seed: int = 0) -> tuple[nn.Module, int]:
    """Construct a backbone by identifier; returns (module, embedding dim)."""
    torch.manual_seed(seed)
    if name == "tiny":
        return TinyEncoder(), 64
    if name in ("resnet18", "resnet18-pretrained"):
        from torchvision.models import resnet18

        weights = None
        if name.endswith("-pretrained"):
            try:
                from torchvision.models import ResNet18_Weights

                weights = ResNet18_Weights.DEFAULT
                model = resnet18(weights=weights)
            except Exception as err:  # weights unavailable offline
                warnings.warn(f"pretrained weights unavailable ({err}); using random init")
                model = resnet18(weights=None)
        else:
            model = resnet18(weights=None)
        model.fc = nn.Identity()
        return model, 512
    raise ValueError(f"unknown backbone {name!r}")


def backbone_checksum(module: nn.Module) -> str:
    """sha256 over all parameters and buffers, in state-dict order."""
    digest = hashlib.sha256()
    for key, tensor in sorted(module.state_dict().items()):
        digest.update(key.encode())
        digest.update(tensor.detach().cpu().numpy().tobytes())
    return digest.hexdigest()


def set_frozen(module: nn.Module, frozen: bool) -> None:
    for p in module.parameters():
        p.requires_grad_(not frozen)
    module.eval() if frozen else module.train()
