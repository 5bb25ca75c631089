"""Free-form image inpainting with aggregated dilated transforms and a
soft-mask patch discriminator."""

from .config import EvalConfig, RunConfig, ServeConfig, TrainConfig
from .discriminator import (
    Discriminator,
    DiscriminatorConfig,
    build_discriminator,
    d_loss,
    g_adv_loss,
)
from .estimator import AotInpainter
from .features import FeatureExtractor
from .generator import (
    AotBlock,
    AotBlockConfig,
    Generator,
    GeneratorConfig,
    build_generator,
    gated_residual,
    inpaint,
)
from .losses import LossWeights, gram, l1_rec, perceptual, style, total_loss
from .masks import (
    RatioBucket,
    compute_hole_ratio,
    generate_free_form_mask,
    hard_patch_label,
    paper_buckets,
    soft_patch_label,
)
from .metrics import MetricsReport, evaluate, fid, psnr, ssim
from .trainer import TrainState, load_checkpoint, save_checkpoint, train, train_step

__version__ = "0.1.0"

__all__ = [
    "AotBlock",
    "AotBlockConfig",
    "AotInpainter",
    "Discriminator",
    "DiscriminatorConfig",
    "EvalConfig",
    "FeatureExtractor",
    "Generator",
    "GeneratorConfig",
    "LossWeights",
    "MetricsReport",
    "RatioBucket",
    "RunConfig",
    "ServeConfig",
    "TrainConfig",
    "TrainState",
    "build_discriminator",
    "build_generator",
    "compute_hole_ratio",
    "d_loss",
    "evaluate",
    "fid",
    "g_adv_loss",
    "gated_residual",
    "generate_free_form_mask",
    "gram",
    "hard_patch_label",
    "inpaint",
    "l1_rec",
    "load_checkpoint",
    "paper_buckets",
    "perceptual",
    "psnr",
    "save_checkpoint",
    "soft_patch_label",
    "ssim",
    "style",
    "total_loss",
    "train",
    "train_step",
]
