"""Under-sampled OCT super-resolution: degradation, frequency decomposition,
the dual-branch hybrid-attention network, losses, metrics, and training."""

from .dataio import (
    DatasetManifest,
    SamplePair,
    bicubic_upsample_columns,
    build_manifest,
    generate_phantom,
    load_image,
    make_sample_pair,
    random_crop,
    save_image,
    undersample_columns,
)
from .errors import CheckpointError, ConfigError, DataError
from .frequency import Decomposition, decompose, gaussian_blur, gaussian_kernel, laplacian, usm_sharpen
from .losses import (
    LossTerms,
    RandomFeatureExtractor,
    VGGFeatureExtractor,
    branch_loss,
    gradient_loss,
    perceptual_loss,
    pixel_loss,
    total_loss,
)
from .metrics import SSIMParams, aline_profile, mse, psnr, ssim
from .model import HASPN, ModelConfig, conv2d, init_model, upsample_width
from .trainer import (
    Checkpoint,
    MetricsReport,
    TrainConfig,
    adam_step,
    evaluate,
    load_checkpoint,
    lr_at_epoch,
    save_checkpoint,
    train,
    train_step,
)

__version__ = "0.1.0"
