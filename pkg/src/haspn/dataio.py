"""Image loading, degradation, pairing, and the synthetic phantom corpus.

Images are plain 2-D float64 numpy arrays (rows x cols) with intensities in
[0, 1]; high-frequency residuals are signed. The interchange format on disk
is 8-bit grayscale PNG. Degradation drops A-scan columns: every ``factor``-th
column (starting at index 0) is kept, so a width-W image becomes width-W/factor
while heights are untouched.

Everything randomized takes an explicit integer seed and uses numpy's PCG64
generator, so identical seeds give bitwise-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .errors import DataError
from .frequency import decompose

ALLOWED_FACTORS = (1, 2, 4, 8)

PHANTOM_MIN_DIM = 32


def load_image(path: str | Path) -> np.ndarray:
    """Load an image file as a float64 array in [0, 1].

    8-bit grayscale PNG is the supported interchange format; multi-channel
    inputs are converted by averaging the channels. Intensities are scaled
    by the bit-depth maximum (255 for 8-bit data).
    """
    with PILImage.open(path) as img:
        arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 3:
        arr = arr.mean(axis=2)
    elif arr.ndim != 2:
        raise DataError(f"{path}: unsupported image layout with shape {arr.shape}")
    return arr / 255.0


def save_image(image: np.ndarray, path: str | Path) -> None:
    """Write an image as 8-bit grayscale PNG, clamping to [0, 1] first."""
    data = np.clip(image, 0.0, 1.0)
    quantized = np.rint(data * 255.0).astype(np.uint8)
    PILImage.fromarray(quantized, mode="L").save(path, format="PNG")


def random_crop(image: np.ndarray, size: int, seed: int) -> np.ndarray:
    """Seeded square crop with the corner drawn uniformly from valid positions."""
    h, w = image.shape
    if h < size or w < size:
        raise ValueError(f"cannot crop {size}x{size} from a {h}x{w} image")
    rng = np.random.default_rng(seed)
    top = int(rng.integers(0, h - size + 1))
    left = int(rng.integers(0, w - size + 1))
    return image[top : top + size, left : left + size].copy()


def undersample_columns(image: np.ndarray, factor: int) -> np.ndarray:
    """Keep columns with index ≡ 0 (mod factor); rows are untouched."""
    if factor not in ALLOWED_FACTORS:
        raise ValueError(f"factor must be one of {ALLOWED_FACTORS}, got {factor}")
    if image.shape[1] % factor != 0:
        raise ValueError(f"width {image.shape[1]} not divisible by factor {factor}")
    return image[:, ::factor].copy()


@dataclass(frozen=True)
class SamplePair:
    """Aligned HR/LR images plus their high-frequency residuals."""

    hr: np.ndarray
    lr: np.ndarray
    hr_hf: np.ndarray
    lr_hf: np.ndarray
    scale: int


def make_sample_pair(hr: np.ndarray, factor: int) -> SamplePair:
    """Degrade an HR image and decompose both sides of the pair.

    The residual of the LR image is computed after under-sampling, i.e. the
    already-degraded image is what gets decomposed.
    """
    lr = undersample_columns(hr, factor)
    return SamplePair(
        hr=hr,
        lr=lr,
        hr_hf=decompose(hr).residual,
        lr_hf=decompose(lr).residual,
        scale=factor,
    )


def generate_phantom(seed: int, height: int = 256, width: int = 256) -> np.ndarray:
    """Deterministic layered-band phantom standing in for a retinal B-scan.

    The image contains 5-9 horizontal bands of distinct mean intensity whose
    boundaries undulate sinusoidally (amplitude <= height/16), with smooth
    band-edge transitions spanning 1-3 pixels and mild multiplicative
    speckle. Output values are clamped to [0, 1].
    """
    if height < PHANTOM_MIN_DIM or width < PHANTOM_MIN_DIM:
        raise ValueError(f"phantom dimensions must be >= {PHANTOM_MIN_DIM}, got {height}x{width}")
    rng = np.random.default_rng(seed)
    n_bands = int(rng.integers(5, 10))

    levels = np.linspace(0.12, 0.88, n_bands)
    rng.shuffle(levels)

    # Band thickness fractions: floor guarantees no band degenerates.
    fractions = 0.5 / n_bands + 0.5 * rng.dirichlet(np.ones(n_bands))
    fractions /= fractions.sum()
    boundaries = np.cumsum(fractions)[:-1] * height

    cols = np.arange(width, dtype=np.float64)
    rows = np.arange(height, dtype=np.float64)[:, None]
    image = np.full((height, width), levels[0])
    for k, base in enumerate(boundaries):
        amplitude = rng.uniform(height / 64.0, height / 16.0)
        freq = rng.uniform(0.4, 1.2)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        span = rng.uniform(1.5, 3.0)
        curve = base + amplitude * np.sin(2.0 * np.pi * freq * cols / width + phase)
        ramp = np.clip((rows - curve[None, :]) / span + 0.5, 0.0, 1.0)
        step = ramp * ramp * (3.0 - 2.0 * ramp)
        image = image + (levels[k + 1] - levels[k]) * step

    speckle = rng.gamma(shape=20000.0, scale=1.0 / 20000.0, size=(height, width))
    return np.clip(image * speckle, 0.0, 1.0)


@dataclass
class DatasetManifest:
    """Deterministic train/val/test split over a directory of images."""

    splits: dict[str, list[str]]
    seed: int
    crop: int | None = None
    scale: int | None = None

    def paths(self, split: str, root: str | Path | None = None) -> list[Path]:
        base = Path(root) if root is not None else Path(".")
        return [base / rel for rel in self.splits[split]]


SPLIT_NAMES = ("train", "val", "test")


def build_manifest(
    root: str | Path,
    ratios: tuple[float, float, float] = (0.8125, 0.125, 0.0625),
    seed: int = 0,
) -> DatasetManifest:
    """Shuffle the PNGs under ``root`` and split them by ``ratios``.

    Ratios must be positive and sum to at most 1; any remainder is left
    unassigned. The shuffle is seeded, so the same (directory, seed) always
    produces the same manifest.
    """
    root = Path(root)
    if any(r <= 0 for r in ratios):
        raise ValueError(f"split ratios must be positive, got {ratios}")
    if sum(ratios) > 1.0 + 1e-9:
        raise ValueError(f"split ratios must sum to <= 1, got {ratios}")
    files = sorted(p.relative_to(root).as_posix() for p in root.glob("*.png"))
    if len(files) < 3:
        raise DataError(f"{root}: need at least 3 PNG images, found {len(files)}")
    order = np.random.default_rng(seed).permutation(len(files))
    shuffled = [files[i] for i in order]
    counts = [int(round(len(files) * r)) for r in ratios]
    splits: dict[str, list[str]] = {}
    start = 0
    for name, count in zip(SPLIT_NAMES, counts):
        count = min(count, len(files) - start)
        splits[name] = shuffled[start : start + count]
        start += count
    return DatasetManifest(splits=splits, seed=seed)


def write_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    """Serialize as UTF-8 text: one "split<TAB>path" line per image, LF endings."""
    lines = []
    for name in SPLIT_NAMES:
        for rel in manifest.splits.get(name, []):
            lines.append(f"{name}\t{rel}\n")
    Path(path).write_bytes("".join(lines).encode("utf-8"))


def load_manifest(path: str | Path, seed: int = 0) -> DatasetManifest:
    splits: dict[str, list[str]] = {name: [] for name in SPLIT_NAMES}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            name, rel = line.split("\t", 1)
        except ValueError:
            raise DataError(f"{path}:{lineno}: malformed manifest line {line!r}") from None
        if name not in SPLIT_NAMES:
            raise DataError(f"{path}:{lineno}: unknown split {name!r}")
        splits[name].append(rel)
    return DatasetManifest(splits=splits, seed=seed)


def _cubic_weight(t: np.ndarray, a: float = -0.5) -> np.ndarray:
    """Keys cubic convolution kernel (a = -0.5, Catmull-Rom)."""
    t = np.abs(t)
    w = np.where(
        t <= 1.0,
        (a + 2.0) * t**3 - (a + 3.0) * t**2 + 1.0,
        np.where(t < 2.0, a * t**3 - 5.0 * a * t**2 + 8.0 * a * t - 4.0 * a, 0.0),
    )
    return w


def bicubic_upsample_columns(image: np.ndarray, factor: int) -> np.ndarray:
    """Width-only bicubic interpolation: the no-learning baseline.

    Output column j samples the input at (j + 0.5) / factor - 0.5 with a
    4-tap cubic kernel and replicated edges; heights are untouched.
    """
    if factor == 1:
        return image.copy()
    if factor not in ALLOWED_FACTORS:
        raise ValueError(f"factor must be one of {ALLOWED_FACTORS}, got {factor}")
    h, w = image.shape
    out_w = w * factor
    src = (np.arange(out_w, dtype=np.float64) + 0.5) / factor - 0.5
    base = np.floor(src).astype(np.int64)
    frac = src - base
    out = np.zeros((h, out_w), dtype=np.float64)
    for tap in range(-1, 3):
        idx = np.clip(base + tap, 0, w - 1)
        out += image[:, idx] * _cubic_weight(frac - tap)[None, :]
    return out
