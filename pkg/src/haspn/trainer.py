"""Optimization loop: Adam with step-decayed learning rate, validation,
checkpointing, and dataset evaluation.

Training is deterministic end to end: the per-epoch sample order and crop
positions are derived statelessly from (seed, epoch), parameters and moments
live in float32, and checkpoints capture the complete optimizer state, so a
resumed run is bitwise identical to an unbroken one.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
import torch

from .archive import read_container, write_container
from .dataio import (
    SamplePair,
    build_manifest,
    load_image,
    load_manifest,
    make_sample_pair,
    random_crop,
    undersample_columns,
)
from .errors import CheckpointError, ConfigError, DataError
from .frequency import decompose
from .losses import (
    DEFAULT_WEIGHTS,
    LossTerms,
    RandomFeatureExtractor,
    VGGFeatureExtractor,
    Weights,
    total_loss,
)
from .metrics import psnr, ssim
from .model import HASPN, ModelConfig, init_model

CHECKPOINT_VERSION = 1
DEFAULT_RATIOS = (0.8125, 0.125, 0.0625)
LOG_HEADER = "epoch,lr,loss_alpha,loss_beta,loss_gamma,loss_total,val_psnr,val_ssim"
REPORT_HEADER = "path,psnr_db,ssim"


@dataclass
class TrainConfig:
    """Full training recipe; defaults follow the published schedule."""

    model: ModelConfig = field(default_factory=ModelConfig)
    data_root: Path = Path(".")
    out_dir: Path = Path("runs")
    initial_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    decay_factor: float = 0.5
    decay_every: int = 20
    batch: int = 2
    epochs: int = 200
    seed: int = 0
    weights: Weights = DEFAULT_WEIGHTS
    crop: int = 256
    ratios: tuple[float, float, float] = DEFAULT_RATIOS
    extractor: str = "random"

    def validate(self) -> None:
        self.model.validate()
        if self.initial_rate <= 0:
            raise ConfigError(f"learning rate must be positive, got {self.initial_rate}")
        for name, beta in (("beta1", self.beta1), ("beta2", self.beta2)):
            if not 0.0 < beta < 1.0:
                raise ConfigError(f"{name} must be in (0, 1), got {beta}")
        if self.epsilon <= 0 or self.decay_factor <= 0:
            raise ConfigError("epsilon and decay_factor must be positive")
        if self.batch < 1 or self.epochs < 1 or self.decay_every < 1:
            raise ConfigError("batch, epochs, and decay_every must be >= 1")
        if self.crop % self.model.scale != 0:
            raise ConfigError(
                f"crop {self.crop} must be divisible by scale {self.model.scale}"
            )


def lr_at_epoch(config: TrainConfig, epoch: int) -> float:
    """Step decay: initial_rate * decay_factor ** (epoch // decay_every)."""
    if epoch < 0:
        raise ValueError(f"epoch must be >= 0, got {epoch}")
    return config.initial_rate * config.decay_factor ** (epoch // config.decay_every)


@dataclass
class AdamState:
    """First/second moment estimates plus the shared step counter."""

    beta1: float
    beta2: float
    epsilon: float
    step: int = 0
    m: dict[str, torch.Tensor] = field(default_factory=dict)
    v: dict[str, torch.Tensor] = field(default_factory=dict)


def init_adam_state(model: HASPN, config: TrainConfig) -> AdamState:
    return AdamState(
        beta1=config.beta1,
        beta2=config.beta2,
        epsilon=config.epsilon,
        m={n: torch.zeros_like(p) for n, p in model.named_parameters()},
        v={n: torch.zeros_like(p) for n, p in model.named_parameters()},
    )


def adam_step(
    params: dict[str, torch.Tensor],
    state: AdamState,
    gradients: dict[str, torch.Tensor],
    rate: float,
) -> tuple[dict[str, torch.Tensor], AdamState]:
    """One bias-corrected Adam update, in place, no weight decay."""
    if gradients.keys() != params.keys():
        missing = params.keys() ^ gradients.keys()
        raise ValueError(f"gradient/parameter name mismatch: {sorted(missing)}")
    state.step += 1
    bc1 = 1.0 - state.beta1**state.step
    bc2 = 1.0 - state.beta2**state.step
    with torch.no_grad():
        for name, p in params.items():
            g = gradients[name]
            m = state.m[name].mul_(state.beta1).add_(g, alpha=1.0 - state.beta1)
            v = state.v[name].mul_(state.beta2).addcmul_(g, g, value=1.0 - state.beta2)
            p.add_((m / bc1) / ((v / bc2).sqrt() + state.epsilon), alpha=-rate)
    return params, state


def _stack(images: Sequence[np.ndarray]) -> torch.Tensor:
    return torch.from_numpy(np.stack(images)[:, None, :, :].astype(np.float32))


def train_step(
    model: HASPN,
    state: AdamState,
    batch: Sequence[SamplePair],
    extractor: Callable[[torch.Tensor], torch.Tensor],
    weights: Weights,
    rate: float,
) -> LossTerms:
    """Forward, composite loss, backprop, Adam update; returns the breakdown."""
    if not batch:
        raise ValueError("batch must be non-empty")
    if len({p.scale for p in batch}) != 1 or len({p.hr.shape for p in batch}) != 1:
        raise ValueError("all pairs in a batch must share scale and dimensions")
    lr_t = _stack([p.lr for p in batch])
    lr_hf_t = _stack([p.lr_hf for p in batch])
    hr_t = _stack([p.hr for p in batch])
    hr_hf_t = _stack([p.hr_hf for p in batch])

    for p in model.parameters():
        p.grad = None
    coarse, hf, fused = model(lr_t, lr_hf_t)
    terms = total_loss(coarse, hf, fused, hr_t, hr_hf_t, extractor, weights)
    terms.total.backward()

    params = dict(model.named_parameters())
    grads = {
        n: (p.grad if p.grad is not None else torch.zeros_like(p)) for n, p in params.items()
    }
    adam_step(params, state, grads, rate)
    return terms.floats()


@dataclass
class Checkpoint:
    """Complete training state: parameters, moments, counters, config echo."""

    version: int
    model_config: ModelConfig
    train_echo: dict
    epoch: int
    params: dict[str, np.ndarray]
    adam_m: dict[str, np.ndarray]
    adam_v: dict[str, np.ndarray]
    adam_step_count: int
    val_metrics: dict[str, float]


def _model_config_meta(config: ModelConfig) -> dict:
    meta = asdict(config)
    meta["adcca_dilations"] = list(config.adcca_dilations)
    return meta


def _model_config_from_meta(meta: dict) -> ModelConfig:
    meta = dict(meta)
    meta["adcca_dilations"] = tuple(meta["adcca_dilations"])
    return ModelConfig(**meta)


def train_config_echo(config: TrainConfig) -> dict:
    echo = asdict(config)
    del echo["model"]
    echo["data_root"] = str(config.data_root)
    echo["out_dir"] = str(config.out_dir)
    echo["weights"] = list(config.weights)
    echo["ratios"] = list(config.ratios)
    return echo


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    meta = {
        "model": _model_config_meta(ckpt.model_config),
        "train": ckpt.train_echo,
        "epoch": ckpt.epoch,
        "adam_step": ckpt.adam_step_count,
        "val": ckpt.val_metrics,
    }
    arrays: dict[str, np.ndarray] = {}
    arrays.update(ckpt.params)
    for name, arr in ckpt.adam_m.items():
        arrays[f"adam.m.{name}"] = arr
    for name, arr in ckpt.adam_v.items():
        arrays[f"adam.v.{name}"] = arr
    write_container(path, meta, arrays)


def load_checkpoint(path: str | Path) -> Checkpoint:
    version, meta, arrays = read_container(path)
    try:
        model_config = _model_config_from_meta(meta["model"])
        epoch = int(meta["epoch"])
        adam_step_count = int(meta["adam_step"])
        train_echo = meta["train"]
        val_metrics = meta["val"]
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"{path}: missing checkpoint field: {exc}") from exc
    params: dict[str, np.ndarray] = {}
    adam_m: dict[str, np.ndarray] = {}
    adam_v: dict[str, np.ndarray] = {}
    for name, arr in arrays.items():
        if name.startswith("adam.m."):
            adam_m[name[len("adam.m.") :]] = arr
        elif name.startswith("adam.v."):
            adam_v[name[len("adam.v.") :]] = arr
        else:
            params[name] = arr
    return Checkpoint(
        version=version,
        model_config=model_config,
        train_echo=train_echo,
        epoch=epoch,
        params=params,
        adam_m=adam_m,
        adam_v=adam_v,
        adam_step_count=adam_step_count,
        val_metrics=val_metrics,
    )


def load_params_into(model: HASPN, arrays: dict[str, np.ndarray]) -> None:
    params = dict(model.named_parameters())
    if arrays.keys() != params.keys():
        missing = params.keys() ^ arrays.keys()
        raise CheckpointError(f"checkpoint parameter names do not match model: {sorted(missing)[:4]}")
    with torch.no_grad():
        for name, p in params.items():
            arr = arrays[name]
            if tuple(arr.shape) != tuple(p.shape):
                raise CheckpointError(
                    f"{name}: checkpoint shape {tuple(arr.shape)} != model shape {tuple(p.shape)}"
                )
            p.copy_(torch.from_numpy(arr))


def model_from_checkpoint(ckpt: Checkpoint) -> HASPN:
    model = init_model(ckpt.model_config, seed=0)
    load_params_into(model, ckpt.params)
    return model


def make_extractor(spec: str):
    if spec == "random":
        return RandomFeatureExtractor(seed=0)
    if spec.startswith("file:"):
        return VGGFeatureExtractor.load(spec[len("file:") :])
    raise ConfigError(f"unknown extractor {spec!r}; expected 'random' or 'file:PATH'")


@dataclass
class MetricsReport:
    """Per-image PSNR/SSIM rows plus their means."""

    rows: list[tuple[str, float, float]]
    config: dict
    wall_clock: float

    @property
    def mean_psnr(self) -> float:
        return sum(r[1] for r in self.rows) / len(self.rows)

    @property
    def mean_ssim(self) -> float:
        return sum(r[2] for r in self.rows) / len(self.rows)


def evaluate(
    model: Callable[[torch.Tensor, torch.Tensor], tuple],
    items: Iterable[tuple[str, np.ndarray]],
    scale: int,
    peak: str = "fixed",
    ssim_mode: str = "windowed",
) -> MetricsReport:
    """Degrade each ground-truth image, reconstruct, and score the fused output.

    ``model`` is any callable mapping (lr, lr_hf) batches to
    (coarse, hf, fused); widths are trimmed to a multiple of ``scale``.
    """
    config = getattr(model, "config", None)
    if config is not None and config.scale != scale:
        raise ConfigError(f"model was built for scale {config.scale}, asked to evaluate {scale}")
    if peak not in ("fixed", "literal"):
        raise ConfigError(f"peak must be 'fixed' or 'literal', got {peak!r}")
    t0 = time.perf_counter()
    rows: list[tuple[str, float, float]] = []
    with torch.no_grad():
        for label, hr in items:
            width = hr.shape[1] - hr.shape[1] % scale
            hr_trim = hr[:, :width]
            lr = undersample_columns(hr_trim, scale)
            lr_hf = decompose(lr).residual
            _, _, fused = model(_stack([lr]), _stack([lr_hf]))
            sr = fused[0, 0].clamp(0.0, 1.0).numpy().astype(np.float64)
            peak_value = float(sr.max()) if peak == "literal" else 1.0
            rows.append(
                (label, psnr(sr, hr_trim, peak=peak_value), ssim(sr, hr_trim, mode=ssim_mode))
            )
    if not rows:
        raise DataError("no images to evaluate")
    report_config = {"scale": scale, "peak": peak, "ssim": ssim_mode, "images": len(rows)}
    return MetricsReport(rows=rows, config=report_config, wall_clock=time.perf_counter() - t0)


def write_report(report: MetricsReport, path: str | Path) -> None:
    lines = [REPORT_HEADER + "\n"]
    lines.extend(f"{label},{p!r},{s!r}\n" for label, p, s in report.rows)
    Path(path).write_bytes("".join(lines).encode("utf-8"))


def _crop_seed(seed: int, epoch: int, index: int) -> int:
    # SeedSequence mixing avoids the collisions a raw XOR of epoch and index
    # would produce; still a pure function of (seed, epoch, index).
    return int(np.random.SeedSequence((seed, epoch, index)).generate_state(1)[0])


def _epoch_order(seed: int, epoch: int, count: int) -> np.ndarray:
    return np.random.default_rng(np.random.SeedSequence((seed, epoch))).permutation(count)


def _snapshot(model: HASPN, state: AdamState, config: TrainConfig, epoch: int,
              val_metrics: dict[str, float]) -> Checkpoint:
    to_np = lambda t: t.detach().cpu().numpy().astype(np.float32, copy=True)
    return Checkpoint(
        version=CHECKPOINT_VERSION,
        model_config=config.model,
        train_echo=train_config_echo(config),
        epoch=epoch,
        params={n: to_np(p) for n, p in model.named_parameters()},
        adam_m={n: to_np(t) for n, t in state.m.items()},
        adam_v={n: to_np(t) for n, t in state.v.items()},
        adam_step_count=state.step,
        val_metrics=val_metrics,
    )


def train(config: TrainConfig, resume: str | Path | None = None) -> Checkpoint:
    """Run the full loop: per-epoch shuffling/cropping, validation, checkpoints.

    Writes epoch_NNNN.hspn each epoch, best.hspn whenever the validation PSNR
    of the fused output improves, and a CSV log row per epoch. Returns the
    final checkpoint.
    """
    config.validate()
    data_root = Path(config.data_root)
    manifest_path = data_root / "manifest.txt"
    if manifest_path.exists():
        manifest = load_manifest(manifest_path, seed=config.seed)
    else:
        manifest = build_manifest(data_root, config.ratios, config.seed)
    train_items = [(rel, load_image(data_root / rel)) for rel in manifest.splits["train"]]
    val_items = [(rel, load_image(data_root / rel)) for rel in manifest.splits["val"]]
    if not train_items:
        raise DataError(f"{data_root}: train split is empty")

    model = init_model(config.model, config.seed)
    state = init_adam_state(model, config)
    extractor = make_extractor(config.extractor)

    start_epoch = 0
    best_psnr = -math.inf
    if resume is not None:
        ckpt = load_checkpoint(resume)
        if ckpt.model_config != config.model:
            raise CheckpointError(
                f"checkpoint model config {ckpt.model_config} does not match run config {config.model}"
            )
        load_params_into(model, ckpt.params)
        with torch.no_grad():
            for name in state.m:
                state.m[name].copy_(torch.from_numpy(ckpt.adam_m[name]))
                state.v[name].copy_(torch.from_numpy(ckpt.adam_v[name]))
        state.step = ckpt.adam_step_count
        start_epoch = ckpt.epoch + 1
        best_psnr = ckpt.val_metrics.get("best_psnr", -math.inf)
        if start_epoch >= config.epochs:
            return ckpt

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / "train_log.csv"
    log_mode = "a" if resume is not None and log_path.exists() else "w"
    scale = config.model.scale

    last: Checkpoint | None = None
    with open(log_path, log_mode, encoding="utf-8", newline="") as log:
        if log_mode == "w":
            log.write(LOG_HEADER + "\n")
        for epoch in range(start_epoch, config.epochs):
            rate = lr_at_epoch(config, epoch)
            order = _epoch_order(config.seed, epoch, len(train_items))
            pairs = []
            for j, idx in enumerate(order):
                hr = random_crop(train_items[idx][1], config.crop, _crop_seed(config.seed, epoch, j))
                pairs.append(make_sample_pair(hr, scale))

            sums = [0.0, 0.0, 0.0, 0.0]
            steps = 0
            for i in range(0, len(pairs), config.batch):
                terms = train_step(model, state, pairs[i : i + config.batch], extractor,
                                   config.weights, rate)
                sums[0] += terms.alpha.total
                sums[1] += terms.beta.total
                sums[2] += terms.gamma.total
                sums[3] += terms.total
                steps += 1
            means = [s / steps for s in sums]

            if val_items:
                report = evaluate(model, val_items, scale)
                val_psnr, val_ssim = report.mean_psnr, report.mean_ssim
            else:
                val_psnr = val_ssim = math.nan
            log.write(
                f"{epoch},{rate!r},{means[0]!r},{means[1]!r},{means[2]!r},{means[3]!r},"
                f"{val_psnr!r},{val_ssim!r}\n"
            )
            log.flush()

            if val_psnr > best_psnr:
                best_psnr = val_psnr
                best = _snapshot(model, state, config, epoch,
                                 {"psnr": val_psnr, "ssim": val_ssim, "best_psnr": best_psnr})
                save_checkpoint(best, out_dir / "best.hspn")
            last = _snapshot(model, state, config, epoch,
                             {"psnr": val_psnr, "ssim": val_ssim, "best_psnr": best_psnr})
            save_checkpoint(last, out_dir / f"epoch_{epoch:04d}.hspn")
    assert last is not None
    return last
