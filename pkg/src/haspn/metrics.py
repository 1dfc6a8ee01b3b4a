"""Image-quality evaluation: MSE, PSNR, SSIM, and A-line profiles.

All metrics operate on 2-D float images. PSNR defaults to a fixed data-range
peak of 1.0 so scores stay comparable across methods; pass the
reconstruction's own maximum as ``peak`` for the literal variant. SSIM
defaults to the 11x11 Gaussian-windowed estimator with the whole-image
("global") form available for exact checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import correlate2d

from .frequency import gaussian_kernel

WINDOW_SIZE = 11
WINDOW_SIGMA = 1.5


@dataclass(frozen=True)
class SSIMParams:
    """Stabilization constants; c3 is tied to c2/2 so the structure term folds
    into the contrast term."""

    k1: float = 0.01
    k2: float = 0.03
    data_range: float = 1.0

    @property
    def c1(self) -> float:
        return (self.k1 * self.data_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.data_range) ** 2

    @property
    def c3(self) -> float:
        return self.c2 / 2.0


def _check_pair(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def mse(a: np.ndarray, b: np.ndarray) -> float:
    """Mean squared pixel difference."""
    _check_pair(a, b)
    return float(np.mean((a - b) ** 2))


def psnr(sr: np.ndarray, hr: np.ndarray, peak: float = 1.0) -> float:
    """10 log10(peak^2 / MSE) in dB; identical images return +inf."""
    if peak <= 0:
        raise ValueError(f"peak must be positive, got {peak}")
    err = mse(sr, hr)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / err)


def ssim(
    sr: np.ndarray,
    hr: np.ndarray,
    params: SSIMParams | None = None,
    mode: str = "windowed",
) -> float:
    """Structural similarity.

    Parameters
    ----------
    sr, hr : ndarray
        Images of equal shape.
    params : SSIMParams, optional
        Stabilization constants; defaults to k1=0.01, k2=0.03, range 1.
    mode : str
        "windowed" (default) evaluates the combined form per 11x11
        Gaussian-weighted window (sigma 1.5) where the window fully fits and
        returns the mean map value; "global" uses whole-image statistics.
    """
    _check_pair(sr, hr)
    if params is None:
        params = SSIMParams()
    c1, c2 = params.c1, params.c2
    if mode == "global":
        mu_x = float(np.mean(sr))
        mu_y = float(np.mean(hr))
        var_x = float(np.mean((sr - mu_x) ** 2))
        var_y = float(np.mean((hr - mu_y) ** 2))
        cov = float(np.mean((sr - mu_x) * (hr - mu_y)))
        num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
        den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
        return num / den
    if mode != "windowed":
        raise ValueError(f"mode must be 'global' or 'windowed', got {mode!r}")
    if min(sr.shape) < WINDOW_SIZE:
        raise ValueError(f"windowed mode needs dims >= {WINDOW_SIZE}, got {sr.shape}")
    win = gaussian_kernel(WINDOW_SIZE, WINDOW_SIGMA)
    x = sr.astype(np.float64, copy=False)
    y = hr.astype(np.float64, copy=False)
    mu_x = correlate2d(x, win, mode="valid")
    mu_y = correlate2d(y, win, mode="valid")
    var_x = correlate2d(x * x, win, mode="valid") - mu_x * mu_x
    var_y = correlate2d(y * y, win, mode="valid") - mu_y * mu_y
    cov = correlate2d(x * y, win, mode="valid") - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


def aline_profile(image: np.ndarray, column: int) -> list[tuple[int, float]]:
    """Intensities of one column, top to bottom, as (row, intensity) pairs."""
    if not 0 <= column < image.shape[1]:
        raise IndexError(f"column {column} out of range for width {image.shape[1]}")
    return [(row, float(value)) for row, value in enumerate(image[:, column])]


def write_profile(profile: list[tuple[int, float]], path: str | Path) -> None:
    """Export a profile as CSV: header "row,intensity", full float precision."""
    lines = ["row,intensity\n"]
    lines.extend(f"{row},{value!r}\n" for row, value in profile)
    Path(path).write_bytes("".join(lines).encode("utf-8"))
