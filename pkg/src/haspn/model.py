"""The dual-branch hybrid-attention super-resolution network.

Two identical branches (coarse image / textures & details) share the same
topology: a 3x3 head conv, G hybrid attention residual blocks fed by a
shared-source skip from the head, a 3x3 conv plus global residual, width-only
bilinear upsampling, and a conv-SARB-conv reconstruction tail. Branch outputs
are concatenated and fused by a three-conv module whose middle conv is
dilated by 2.

All convolutions are stride-1 "same" unless noted; padding is
dilation*(k-1)/2 so spatial dims are preserved (stride-2 convs halve them,
rounding up). There are no normalization layers; a forward pass is pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
import torch.nn.functional as F
from torch import nn

from .errors import ConfigError

ALLOWED_SCALES = (2, 4, 8)


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters: block counts, width, and attention shapes."""

    g: int = 20
    m: int = 5
    c: int = 64
    scale: int = 4
    esa_reduction: int = 4
    adcca_dilations: tuple[int, ...] = (1, 3, 5)
    adcca_reduction: int = 4

    def validate(self) -> None:
        if self.g < 1 or self.m < 1:
            raise ConfigError(f"g and m must be >= 1, got g={self.g}, m={self.m}")
        if self.c < self.esa_reduction:
            raise ConfigError(f"c={self.c} must be >= esa_reduction={self.esa_reduction}")
        if self.scale not in ALLOWED_SCALES:
            raise ConfigError(f"scale must be one of {ALLOWED_SCALES}, got {self.scale}")
        if any(d < 1 for d in self.adcca_dilations):
            raise ConfigError(f"dilations must be >= 1, got {self.adcca_dilations}")
        if len(set(self.adcca_dilations)) != len(self.adcca_dilations):
            raise ConfigError(f"dilations must be distinct, got {self.adcca_dilations}")
        if self.esa_reduction < 1 or self.adcca_reduction < 1:
            raise ConfigError("reduction divisors must be >= 1")


def conv2d(
    x: torch.Tensor,
    weight: torch.Tensor,
    bias: torch.Tensor | None = None,
    stride: int = 1,
    dilation: int = 1,
) -> torch.Tensor:
    """Cross-correlation with zero padding dilation*(k-1)/2.

    Stride-1 calls preserve H and W; stride-2 calls produce ceil(dim/2).
    """
    if x.shape[1] != weight.shape[1]:
        raise ValueError(f"input has {x.shape[1]} channels, weight expects {weight.shape[1]}")
    if stride < 1 or dilation < 1:
        raise ValueError("stride and dilation must be >= 1")
    padding = dilation * (weight.shape[2] - 1) // 2
    return F.conv2d(x, weight, bias, stride=stride, padding=padding, dilation=dilation)


def upsample_width(x: torch.Tensor, factor: int) -> torch.Tensor:
    """Bilinear upsampling along width only; output column j samples (j+0.5)/factor - 0.5."""
    n, c, h, w = x.shape
    return F.interpolate(x, size=(h, w * factor), mode="bilinear", align_corners=False)


class ESA(nn.Module):
    """Enhanced spatial attention: per-pixel gate in (0, 1) multiplied into the input.

    Channel squeeze, stride-2 conv, 7x7/3 max pool, a single 3x3 feature
    conv, bilinear restore, channel expand, sigmoid.
    """

    def __init__(self, channels: int, reduction: int = 4):
        super().__init__()
        f = channels // reduction
        self.squeeze = nn.Conv2d(channels, f, 1)
        self.down = nn.Conv2d(f, f, 3, stride=2, padding=1)
        self.extract = nn.Conv2d(f, f, 3, padding=1)
        self.expand = nn.Conv2d(f, channels, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[2] < 8 or x.shape[3] < 8:
            raise ValueError(f"spatial dims must be >= 8, got {tuple(x.shape[2:])}")
        y = self.squeeze(x)
        y = self.down(y)
        y = F.max_pool2d(y, kernel_size=7, stride=3, padding=3)
        y = self.extract(y)
        y = F.interpolate(y, size=x.shape[2:], mode="bilinear", align_corners=False)
        y = self.expand(y)
        return x * torch.sigmoid(y)


class FFM(nn.Module):
    """Feature fusion: concatenate along channels, then a 1x1 and a 3x3 conv."""

    def __init__(self, in_channels: int, channels: int):
        super().__init__()
        self.reduce = nn.Conv2d(in_channels, channels, 1)
        self.mix = nn.Conv2d(channels, channels, 3, padding=1)

    def forward(self, parts: list[torch.Tensor]) -> torch.Tensor:
        if len({p.shape[2:] for p in parts}) != 1:
            raise ValueError("all parts must share spatial dimensions")
        return self.mix(self.reduce(torch.cat(parts, dim=1)))


class ADCCA(nn.Module):
    """Dilated-convolution channel attention: per-channel gate in (0, 1).

    2x2 max-pool squeeze, parallel bottlenecked DC-ReLU-DC paths (one per
    dilation), FFM merge, global average pool, sigmoid.
    """

    def __init__(self, channels: int, dilations: tuple[int, ...] = (1, 3, 5), reduction: int = 4):
        super().__init__()
        bottleneck = max(channels // reduction, 4)
        self.paths = nn.ModuleList(
            nn.Sequential(
                nn.Conv2d(channels, bottleneck, 3, padding=d, dilation=d),
                nn.ReLU(),
                nn.Conv2d(bottleneck, channels, 3, padding=d, dilation=d),
            )
            for d in dilations
        )
        self.merge = FFM(channels * len(dilations), channels)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[2] < 4 or x.shape[3] < 4:
            raise ValueError(f"spatial dims must be >= 4, got {tuple(x.shape[2:])}")
        s = F.max_pool2d(x, kernel_size=2, stride=2)
        merged = self.merge([path(s) for path in self.paths])
        gate = torch.sigmoid(merged.mean(dim=(2, 3), keepdim=True))
        return x * gate


class SARB(nn.Module):
    """Spatial attention residual block: conv-ReLU-conv, ESA, residual add."""

    def __init__(self, channels: int, esa_reduction: int = 4):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1)
        self.esa = ESA(channels, esa_reduction)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.esa(self.conv2(F.relu(self.conv1(x)))) + x


class HARB(nn.Module):
    """Hybrid attention residual block: M SARBs then channel attention.

    The shared-source shallow features are added at block entry and the sum
    also serves as the block residual.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.sarbs = nn.ModuleList(
            SARB(config.c, config.esa_reduction) for _ in range(config.m)
        )
        self.adcca = ADCCA(config.c, config.adcca_dilations, config.adcca_reduction)

    def forward(self, x: torch.Tensor, shallow: torch.Tensor) -> torch.Tensor:
        if x.shape != shallow.shape:
            raise ValueError(f"shape mismatch: {tuple(x.shape)} vs {tuple(shallow.shape)}")
        u = x + shallow
        v = u
        for sarb in self.sarbs:
            v = sarb(v)
        return self.adcca(v) + u


class Branch(nn.Module):
    """One full branch: shallow extraction, G HARBs, width upsample, reconstruction."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        c = config.c
        self.scale = config.scale
        self.head = nn.Conv2d(1, c, 3, padding=1)
        self.harbs = nn.ModuleList(HARB(config) for _ in range(config.g))
        self.post = nn.Conv2d(c, c, 3, padding=1)
        self.recon_in = nn.Conv2d(c, c, 3, padding=1)
        self.recon_sarb = SARB(c, config.esa_reduction)
        self.recon_out = nn.Conv2d(c, 1, 3, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        shallow = self.head(x)
        deep = shallow
        for harb in self.harbs:
            deep = harb(deep, shallow)
        deep = self.post(deep) + shallow
        up = upsample_width(deep, self.scale)
        return self.recon_out(self.recon_sarb(self.recon_in(up)))


class HASPN(nn.Module):
    """Dual-branch network mapping (lr, lr_hf) to (coarse, hf, fused) outputs.

    All three outputs have shape (N, 1, H, W*scale); the fused image is the
    deployment output, the other two exist as auxiliary loss targets.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        config.validate()
        self.config = config
        c = config.c
        self.branch0 = Branch(config)  # coarse image branch
        self.branch1 = Branch(config)  # textures & details branch
        self.fuse_in = nn.Conv2d(2, c, 3, padding=1)
        self.fuse_mid = nn.Conv2d(c, c, 3, padding=2, dilation=2)
        self.fuse_out = nn.Conv2d(c, 1, 3, padding=1)

    def forward(
        self, lr: torch.Tensor, lr_hf: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        if lr.shape != lr_hf.shape:
            raise ValueError(f"lr {tuple(lr.shape)} and lr_hf {tuple(lr_hf.shape)} must match")
        coarse = self.branch0(lr)
        hf = self.branch1(lr_hf)
        fused = self.fuse_out(self.fuse_mid(self.fuse_in(torch.cat([coarse, hf], dim=1))))
        return coarse, hf, fused


def init_model(config: ModelConfig, seed: int = 0) -> HASPN:
    """Build the network with seeded fan-in-scaled uniform weights, zero biases.

    Weight bound is sqrt(1/fan_in) with fan_in = in_channels * kh * kw.
    Parameters are drawn in registration order from a private generator, so
    the same (config, seed) is bitwise reproducible and the caller's global
    RNG state is left untouched.
    """
    config.validate()
    with torch.random.fork_rng():
        model = HASPN(config)
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for name, p in model.named_parameters():
            if name.endswith("bias"):
                p.zero_()
            else:
                fan_in = p.shape[1] * p.shape[2] * p.shape[3]
                bound = (1.0 / fan_in) ** 0.5
                p.uniform_(-bound, bound, generator=gen)
    return model
