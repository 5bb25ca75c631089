"""Patch discriminator and the two adversarial losses.

The discriminator is a fully convolutional stack of four stride-2 layers, so
each output cell scores one overlapping input patch and the prediction map is
1/16 of the input resolution. Its training target depends on `target_mode`:

- ``sm``: regress the soft patch-level mask (blurred, downsampled inverse mask)
- ``hm``: regress the hard binary patch-level mask
- ``patchgan``: classic behaviour, every patch of an inpainted image is fake
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
from torch.nn.utils import spectral_norm as _sn

from . import masks
from .errors import ConfigError
from .generator import _deterministic_init_
from .validation import check_same_shape

TARGET_MODES = ("sm", "hm", "patchgan")


@dataclass(frozen=True)
class DiscriminatorConfig:
    num_layers: int = 4
    base_channels: int = 64
    target_mode: str = "sm"
    spectral_norm: bool = True
    input_channels: int = 3

    def __post_init__(self):
        if self.num_layers < 1:
            raise ConfigError("num_layers must be >= 1")
        if self.target_mode not in TARGET_MODES:
            raise ConfigError(f"target_mode must be one of {TARGET_MODES}")

    @property
    def downsample_factor(self) -> int:
        """Product of the stride-2 convolutions."""
        return 2**self.num_layers


class Discriminator(nn.Module):
    def __init__(self, config: DiscriminatorConfig):
        super().__init__()
        self.config = config
        wrap = _sn if config.spectral_norm else (lambda m: m)
        layers: list[nn.Module] = []
        c_in = config.input_channels
        c_out = config.base_channels
        for _ in range(config.num_layers):
            layers += [wrap(nn.Conv2d(c_in, c_out, 4, stride=2, padding=1)), nn.LeakyReLU(0.2)]
            c_in, c_out = c_out, min(c_out * 2, 8 * config.base_channels)
        layers.append(wrap(nn.Conv2d(c_in, 1, 3, stride=1, padding=1)))
        self.net = nn.Sequential(*layers)

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        return self.net(image)


def build_discriminator(config: DiscriminatorConfig, seed: int) -> Discriminator:
    # fork_rng pins the spectral-norm power-iteration buffers, which are drawn
    # from the global RNG at construction time
    with torch.random.fork_rng():
        torch.manual_seed(seed)
        model = Discriminator(config)
    _deterministic_init_(model, seed)
    return model


def d_loss(pred_fake: torch.Tensor, pred_real: torch.Tensor, label: torch.Tensor) -> torch.Tensor:
    """Least-squares discriminator loss against the patch-level target.

    mean[(D(z) - label)^2] + mean[(D(x) - 1)^2].
    """
    check_same_shape(pred_fake, label, "pred_fake/label")
    return ((pred_fake - label) ** 2).mean() + ((pred_real - 1.0) ** 2).mean()


def g_adv_loss(pred_fake: torch.Tensor, mask_weight: torch.Tensor, eps: float = 1e-8) -> torch.Tensor:
    """Generator adversarial loss over synthesized patches only.

    sum[(D(z) - 1)^2 * w] / max(sum w, eps), where w is the per-patch hole
    coverage. Normalizing by the mask mass keeps the gradient scale independent
    of hole size; an empty mask yields exactly 0.
    """
    check_same_shape(pred_fake, mask_weight, "pred_fake/mask_weight")
    num = (((pred_fake - 1.0) ** 2) * mask_weight).sum()
    return num / mask_weight.sum().clamp(min=eps)


def discriminator_target(
    mask: torch.Tensor,
    mode: str,
    downsample_factor: int,
    kernel_size: int = masks.DEFAULT_BLUR_KERNEL,
    sigma: float | None = None,
) -> torch.Tensor:
    """Patch-level target for an inpainted image under the given mode."""
    if mode == "sm":
        return masks.soft_patch_label(mask, downsample_factor, kernel_size, sigma)
    if mode == "hm":
        return masks.hard_patch_label(mask, downsample_factor)
    if mode == "patchgan":
        h, w = mask.shape[-2:]
        return torch.zeros(
            mask.shape[0], 1, h // downsample_factor, w // downsample_factor,
            dtype=torch.float32,
        )
    raise ConfigError(f"unknown target mode {mode!r}")
