"""Composite training loss: pixel L1, perceptual feature distance, gradient loss.

The same three-term loss is applied to three output/target pairings: the
coarse image vs the ground truth (alpha), the high-frequency image vs the
ground truth's residual (beta), and the fused image vs the ground truth
(gamma). The grand total is the plain sum of the three.

Per-image norms are unaveraged sums; only the 1/N over the batch is applied.
A per-pixel-mean variant is available via ``normalize="mean"``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import torch
import torch.nn.functional as F
from torch import nn

from .archive import read_container
from .errors import ConfigError
from .frequency import tensor_laplacian

Weights = tuple[float, float, float]
DEFAULT_WEIGHTS: Weights = (1.0, 1.0, 1.0)


def _scalar(value: torch.Tensor | float) -> float:
    if isinstance(value, torch.Tensor):
        return float(value.detach())
    return float(value)


@dataclass(frozen=True)
class BranchTerms:
    """Weighted loss components for one output/target pairing."""

    pix: torch.Tensor | float
    per: torch.Tensor | float
    gra: torch.Tensor | float

    @property
    def total(self) -> torch.Tensor | float:
        return self.pix + self.per + self.gra

    def floats(self) -> "BranchTerms":
        return BranchTerms(_scalar(self.pix), _scalar(self.per), _scalar(self.gra))


@dataclass(frozen=True)
class LossTerms:
    """Loss breakdown over the three pairings; ``total`` is what gets minimized."""

    alpha: BranchTerms
    beta: BranchTerms
    gamma: BranchTerms

    @property
    def total(self) -> torch.Tensor | float:
        return self.alpha.total + self.beta.total + self.gamma.total

    def floats(self) -> "LossTerms":
        return LossTerms(self.alpha.floats(), self.beta.floats(), self.gamma.floats())


def _check_shapes(sr: torch.Tensor, hr: torch.Tensor) -> None:
    if sr.shape != hr.shape:
        raise ValueError(f"shape mismatch: {tuple(sr.shape)} vs {tuple(hr.shape)}")


def pixel_loss(sr: torch.Tensor, hr: torch.Tensor, normalize: str = "sum") -> torch.Tensor:
    """L1 pixel error: mean over the batch of per-image absolute-difference sums."""
    _check_shapes(sr, hr)
    diff = (sr - hr).abs()
    if normalize == "mean":
        return diff.mean()
    return diff.sum() / sr.shape[0]


def perceptual_loss(
    sr: torch.Tensor,
    hr: torch.Tensor,
    extractor: Callable[[torch.Tensor], torch.Tensor],
    signed: bool = False,
) -> torch.Tensor:
    """Squared L2 distance between extracted features, averaged over the batch.

    Single-channel inputs are replicated when the extractor expects 3
    channels; signed inputs are offset by +0.5 first when the extractor
    declares a [0, 1] input domain.
    """
    _check_shapes(sr, hr)

    def prepare(x: torch.Tensor) -> torch.Tensor:
        if signed and getattr(extractor, "input_domain", None) == "unit":
            x = x + 0.5
        expected = getattr(extractor, "in_channels", None)
        if expected is not None and x.shape[1] != expected:
            if x.shape[1] == 1 and expected == 3:
                x = x.repeat(1, 3, 1, 1)
            else:
                raise ConfigError(
                    f"extractor expects {expected} channels, input has {x.shape[1]}"
                )
        return x

    fs = extractor(prepare(sr))
    fh = extractor(prepare(hr))
    return ((fs - fh) ** 2).sum() / sr.shape[0]


def gradient_loss(sr: torch.Tensor, hr: torch.Tensor) -> torch.Tensor:
    """L1 distance between discrete Laplacians (replicate borders)."""
    _check_shapes(sr, hr)
    return (tensor_laplacian(sr) - tensor_laplacian(hr)).abs().sum() / sr.shape[0]


def branch_loss(
    out: torch.Tensor,
    target: torch.Tensor,
    extractor: Callable[[torch.Tensor], torch.Tensor],
    weights: Weights = DEFAULT_WEIGHTS,
    signed: bool = False,
) -> BranchTerms:
    """Weighted three-term loss for one pairing; components come back weighted
    so that their sum equals the pairing total."""
    w_pix, w_per, w_gra = weights
    return BranchTerms(
        pix=w_pix * pixel_loss(out, target),
        per=w_per * perceptual_loss(out, target, extractor, signed=signed),
        gra=w_gra * gradient_loss(out, target),
    )


def total_loss(
    coarse: torch.Tensor,
    hf: torch.Tensor,
    fused: torch.Tensor,
    hr: torch.Tensor,
    hr_hf: torch.Tensor,
    extractor: Callable[[torch.Tensor], torch.Tensor],
    weights: Weights = DEFAULT_WEIGHTS,
) -> LossTerms:
    """Full loss over the three pairings; the beta pairing is signed data."""
    return LossTerms(
        alpha=branch_loss(coarse, hr, extractor, weights),
        beta=branch_loss(hf, hr_hf, extractor, weights, signed=True),
        gamma=branch_loss(fused, hr, extractor, weights),
    )


class RandomFeatureExtractor(nn.Module):
    """Default perceptual feature map: a frozen, seeded random conv stack.

    Four 3x3 conv+ReLU layers with two 2x2 average-pool stages, widening
    16 -> 32 channels. Deterministic per seed; parameters never train. Keeps
    the perceptual term exercised end to end without any external weights.
    """

    input_domain = "unit"
    in_channels = 1

    def __init__(self, seed: int = 0):
        super().__init__()
        self.identifier = f"random-conv-16x32-seed{seed}"
        with torch.random.fork_rng():
            self.conv1 = nn.Conv2d(1, 16, 3, padding=1)
            self.conv2 = nn.Conv2d(16, 16, 3, padding=1)
            self.conv3 = nn.Conv2d(16, 32, 3, padding=1)
            self.conv4 = nn.Conv2d(32, 32, 3, padding=1)
        # ReLU-gain normal init keeps feature variance O(1) through the stack.
        gen = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            for name, p in self.named_parameters():
                if name.endswith("bias"):
                    p.zero_()
                else:
                    std = (2.0 / (p.shape[1] * p.shape[2] * p.shape[3])) ** 0.5
                    p.normal_(0.0, std, generator=gen)
        for p in self.parameters():
            p.requires_grad_(False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = F.relu(self.conv1(x))
        x = F.relu(self.conv2(x))
        x = F.avg_pool2d(x, 2)
        x = F.relu(self.conv3(x))
        x = F.avg_pool2d(x, 2)
        x = F.relu(self.conv4(x))
        return x


# Channel plan of the VGG19 feature stack up to (and including) the fourth
# pooling stage; features are tapped right after that pool.
_VGG_PLAN = (64, 64, "M", 128, 128, "M", 256, 256, 256, 256, "M", 512, 512, 512, 512, "M")


class VGGFeatureExtractor(nn.Module):
    """Optional extractor built on externally supplied VGG19-topology weights.

    Weights come from the same binary parameter-archive container the trainer
    uses for checkpoints, keyed "conv{i}.weight"/"conv{i}.bias" in stack
    order. Inputs are expected in [0, 1] with 3 channels (grayscale is
    replicated by the loss).
    """

    input_domain = "unit"
    in_channels = 3
    identifier = "vgg19-pool4"

    def __init__(self):
        super().__init__()
        layers: list[nn.Module] = []
        chans = 3
        for item in _VGG_PLAN:
            if item == "M":
                layers.append(nn.MaxPool2d(2, 2))
            else:
                layers.append(nn.Conv2d(chans, item, 3, padding=1))
                layers.append(nn.ReLU())
                chans = item
        with torch.random.fork_rng():
            self.stack = nn.Sequential(*layers)

    @classmethod
    def load(cls, path) -> "VGGFeatureExtractor":
        _, _, arrays = read_container(path)
        extractor = cls()
        convs = [m for m in extractor.stack if isinstance(m, nn.Conv2d)]
        with torch.no_grad():
            for i, conv in enumerate(convs):
                for part, tensor in (("weight", conv.weight), ("bias", conv.bias)):
                    key = f"conv{i}.{part}"
                    if key not in arrays:
                        raise ConfigError(f"extractor weight file missing entry {key!r}")
                    arr = arrays[key]
                    if tuple(arr.shape) != tuple(tensor.shape):
                        raise ConfigError(
                            f"{key}: expected shape {tuple(tensor.shape)}, got {tuple(arr.shape)}"
                        )
                    tensor.copy_(torch.from_numpy(arr))
        for p in extractor.parameters():
            p.requires_grad_(False)
        return extractor

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.stack(x)
