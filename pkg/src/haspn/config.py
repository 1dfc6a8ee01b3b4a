"""Run configuration files: INI text with [model], [train], and [data] sections.

Unknown sections or keys are rejected by name; missing keys fall back to the
documented defaults (the published training recipe). Example:

    [model]
    g = 2
    m = 2
    c = 16
    scale = 4

    [train]
    lr = 1e-4
    batch = 2
    epochs = 30
    seed = 7

    [data]
    root = data/phantoms
    crop = 128
    out = runs/tiny
"""

from __future__ import annotations

import configparser
import os
from pathlib import Path

from .errors import ConfigError
from .model import ModelConfig
from .trainer import TrainConfig

OUT_ROOT_ENV = "HASPN_OUT_ROOT"

_SECTION_KEYS = {
    "model": {"g", "m", "c", "scale", "esa_reduction", "adcca_dilations", "adcca_reduction"},
    "train": {
        "lr",
        "beta1",
        "beta2",
        "epsilon",
        "batch",
        "epochs",
        "decay_every",
        "decay_factor",
        "seed",
        "w_pix",
        "w_per",
        "w_gra",
        "extractor",
    },
    "data": {"root", "crop", "ratios", "out"},
}


def _convert(section: str, key: str, raw: str, conv):
    try:
        return conv(raw)
    except (ValueError, TypeError):
        raise ConfigError(f"bad value for '{key}' in [{section}]: {raw!r}") from None


def _int_tuple(raw: str) -> tuple[int, ...]:
    return tuple(int(part.strip()) for part in raw.split(","))


def _float_tuple(raw: str) -> tuple[float, ...]:
    return tuple(float(part.strip()) for part in raw.split(","))


def parse_run_config(path: str | Path) -> TrainConfig:
    """Parse and validate a run configuration file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    for section in cp.sections():
        if section not in _SECTION_KEYS:
            raise ConfigError(f"unknown section [{section}] in {path}")
        for key in cp[section]:
            if key not in _SECTION_KEYS[section]:
                raise ConfigError(f"unknown key '{key}' in [{section}] of {path}")

    def get(section: str, key: str, conv, default):
        if cp.has_option(section, key):
            return _convert(section, key, cp.get(section, key), conv)
        return default

    model = ModelConfig(
        g=get("model", "g", int, 20),
        m=get("model", "m", int, 5),
        c=get("model", "c", int, 64),
        scale=get("model", "scale", int, 4),
        esa_reduction=get("model", "esa_reduction", int, 4),
        adcca_dilations=get("model", "adcca_dilations", _int_tuple, (1, 3, 5)),
        adcca_reduction=get("model", "adcca_reduction", int, 4),
    )

    if not cp.has_option("data", "root"):
        raise ConfigError(f"missing required key 'root' in [data] of {path}")
    out_dir = Path(get("data", "out", str, "runs"))
    out_root = os.environ.get(OUT_ROOT_ENV)
    if out_root and not out_dir.is_absolute():
        out_dir = Path(out_root) / out_dir

    ratios = get("data", "ratios", _float_tuple, (0.8125, 0.125, 0.0625))
    if len(ratios) != 3:
        raise ConfigError(f"'ratios' in [data] must have 3 values, got {len(ratios)}")
    weights = (
        get("train", "w_pix", float, 1.0),
        get("train", "w_per", float, 1.0),
        get("train", "w_gra", float, 1.0),
    )

    config = TrainConfig(
        model=model,
        data_root=Path(cp.get("data", "root")),
        out_dir=out_dir,
        initial_rate=get("train", "lr", float, 1e-4),
        beta1=get("train", "beta1", float, 0.9),
        beta2=get("train", "beta2", float, 0.999),
        epsilon=get("train", "epsilon", float, 1e-8),
        decay_factor=get("train", "decay_factor", float, 0.5),
        decay_every=get("train", "decay_every", int, 20),
        batch=get("train", "batch", int, 2),
        epochs=get("train", "epochs", int, 200),
        seed=get("train", "seed", int, 0),
        weights=weights,
        crop=get("data", "crop", int, 256),
        ratios=ratios,
        extractor=get("train", "extractor", str, "random"),
    )
    config.validate()
    return config
