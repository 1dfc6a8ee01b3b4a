"""Unsharp-masking frequency decomposition.

Images are split into a blurred base and a signed high-frequency residual
(``residual = image - blurred``). The residual feeds the textures & details
branch of the network; the discrete Laplacian defined here is reused by the
gradient loss.

Border policy: the Gaussian blur uses reflect padding (mirror without
repeating the border pixel), the Laplacian uses replicate padding. Both keep
the identities ``blur(const) == const`` and ``laplacian(const) == 0`` exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

DEFAULT_KERNEL_SIZE = 5
DEFAULT_SIGMA = 1.5


def gaussian_kernel(size: int = DEFAULT_KERNEL_SIZE, sigma: float = DEFAULT_SIGMA) -> np.ndarray:
    """Isotropic 2-D Gaussian kernel, normalized to sum 1.

    weight(x, y) ∝ exp(-(x^2 + y^2) / (2 sigma^2)) over integer offsets in
    [-size//2, size//2]. Separable: the 2-D kernel is the outer product of
    the normalized 1-D profile with itself.
    """
    if size % 2 == 0 or size < 3:
        raise ValueError(f"kernel size must be odd and >= 3, got {size}")
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    half = size // 2
    offsets = np.arange(-half, half + 1, dtype=np.float64)
    profile = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    profile /= profile.sum()
    return np.outer(profile, profile)


def gaussian_blur(image: np.ndarray, kernel: np.ndarray | None = None) -> np.ndarray:
    """2-D correlation of ``image`` with ``kernel`` under reflect padding.

    Output has the same shape as the input. ``kernel`` defaults to the
    5x5 sigma=1.5 Gaussian.
    """
    if kernel is None:
        kernel = gaussian_kernel()
    k = kernel.shape[0]
    if image.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {image.shape}")
    if image.shape[0] < k or image.shape[1] < k:
        raise ValueError(f"image {image.shape} smaller than kernel {k}x{k}")
    half = k // 2
    padded = np.pad(image, half, mode="reflect")
    windows = np.lib.stride_tricks.sliding_window_view(padded, (k, k))
    return np.tensordot(windows, kernel, axes=([2, 3], [0, 1]))


@dataclass(frozen=True)
class Decomposition:
    """Blurred base plus signed residual; ``blurred + residual`` recovers the source."""

    blurred: np.ndarray
    residual: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.blurred.shape


def decompose(image: np.ndarray) -> Decomposition:
    """Split an image into its blurred base and high-frequency residual."""
    if image.ndim != 2 or min(image.shape) < DEFAULT_KERNEL_SIZE:
        raise ValueError(f"image must be 2-D with dims >= {DEFAULT_KERNEL_SIZE}, got {image.shape}")
    blurred = gaussian_blur(image)
    return Decomposition(blurred=blurred, residual=image - blurred)


def usm_sharpen(image: np.ndarray, k: float = 1.0) -> np.ndarray:
    """Classical unsharp masking: image plus ``k`` times its residual.

    Reference operation only; the network's textures & details branch takes
    over this role in the reconstruction pipeline. No clamping is applied.
    """
    if k < 0:
        raise ValueError(f"sharpening coefficient must be >= 0, got {k}")
    return image + k * decompose(image).residual


def laplacian(image: np.ndarray) -> np.ndarray:
    """Discrete 5-point Laplacian with replicate borders.

    lap(x, y) = I(x+1,y) + I(x-1,y) + I(x,y+1) + I(x,y-1) - 4 I(x,y).
    Replicate padding keeps the output zero everywhere for constant images.
    """
    if image.ndim != 2 or min(image.shape) < 3:
        raise ValueError(f"image must be 2-D with dims >= 3, got {image.shape}")
    p = np.pad(image, 1, mode="edge")
    return p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:] - 4.0 * image


def tensor_laplacian(x: torch.Tensor) -> torch.Tensor:
    """Same 5-point Laplacian on (N, C, H, W) tensors; differentiable."""
    if x.ndim != 4 or x.shape[2] < 3 or x.shape[3] < 3:
        raise ValueError(f"expected (N, C, H, W) with H, W >= 3, got {tuple(x.shape)}")
    p = F.pad(x, (1, 1, 1, 1), mode="replicate")
    return (
        p[:, :, :-2, 1:-1]
        + p[:, :, 2:, 1:-1]
        + p[:, :, 1:-1, :-2]
        + p[:, :, 1:-1, 2:]
        - 4.0 * x
    )
