"""Inpainting generator: encoder, a stack of aggregation blocks, decoder.

Each block splits a standard convolution into parallel dilated branches
(split-transform-merge), fuses them back to full width, and combines the
result with the block input through a spatially-variant gated residual.
The generator deliberately contains no normalization layers; the final tanh
maps outputs to [-1, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ConfigError
from .validation import check_image_batch, check_mask, check_same_shape, check_same_spatial

ENCODER_REDUCTION = 4

_NORM_TYPES = (
    nn.modules.batchnorm._BatchNorm,
    nn.GroupNorm,
    nn.LayerNorm,
    nn.modules.instancenorm._InstanceNorm,
    nn.LocalResponseNorm,
)


@dataclass(frozen=True)
class AotBlockConfig:
    width: int = 256
    rates: tuple[int, ...] = (1, 2, 4, 8)
    residual_mode: str = "gated"  # or "identity"
    kernel_size: int = 3

    def __post_init__(self):
        if len(self.rates) < 1 or any(r < 1 for r in self.rates):
            raise ConfigError(f"invalid dilation rates {self.rates}")
        if self.width % len(self.rates):
            raise ConfigError(f"width {self.width} not divisible by {len(self.rates)} branches")
        if self.residual_mode not in ("gated", "identity"):
            raise ConfigError(f"unknown residual_mode {self.residual_mode!r}")

    @property
    def branch_channels(self) -> int:
        return self.width // len(self.rates)


@dataclass(frozen=True)
class GeneratorConfig:
    input_channels: int = 4  # masked RGB + mask
    base_width: int = 256
    num_blocks: int = 8
    block: AotBlockConfig = field(default_factory=AotBlockConfig)
    output_channels: int = 3

    def __post_init__(self):
        if self.num_blocks < 1:
            raise ConfigError("num_blocks must be >= 1")
        if self.block.width != self.base_width:
            raise ConfigError(
                f"block width {self.block.width} must equal base_width {self.base_width}"
            )
        if self.base_width % 4:
            raise ConfigError("base_width must be divisible by 4 (encoder stages)")

    @classmethod
    def paper(cls) -> "GeneratorConfig":
        return cls()

    @classmethod
    def desk(
        cls,
        base_width: int = 64,
        num_blocks: int = 8,
        rates: tuple[int, ...] = (1, 2, 4, 8),
        residual_mode: str = "gated",
    ) -> "GeneratorConfig":
        """Desk-scale preset: narrower channels, same block structure."""
        block = AotBlockConfig(width=base_width, rates=rates, residual_mode=residual_mode)
        return cls(base_width=base_width, num_blocks=num_blocks, block=block)

def gated_residual(x1: torch.Tensor, x2: torch.Tensor, g: torch.Tensor) -> torch.Tensor:
    """Spatially-variant convex combination x1*g + x2*(1-g)."""
    check_same_shape(x1, x2, "x1/x2")
    check_same_shape(x1, g, "x1/gate")
    return x1 * g + x2 * (1.0 - g)


class AotBlock(nn.Module):
    """Split-transform-merge block with a gated (or identity) residual.

    The parallel dilated branches jointly hold exactly the parameters of the
    single undivided convolution they replace.
    """

    def __init__(self, config: AotBlockConfig):
        super().__init__()
        self.config = config
        k = config.kernel_size
        self.branches = nn.ModuleList(
            nn.Conv2d(config.width, config.branch_channels, k, padding=r * (k // 2), dilation=r)
            for r in config.rates
        )
        self.fuse = nn.Conv2d(config.width, config.width, k, padding=k // 2)
        if config.residual_mode == "gated":
            self.gate = nn.Conv2d(config.width, config.width, 3, padding=1)
        else:
            self.gate = None

    def gate_values(self, x1: torch.Tensor) -> torch.Tensor:
        if self.gate is None:
            raise RuntimeError("block has no gate (identity residual mode)")
        return torch.sigmoid(self.gate(x1))

    def forward(self, x1: torch.Tensor) -> torch.Tensor:
        if x1.shape[1] != self.config.width:
            raise ConfigError(f"expected {self.config.width} channels, got {x1.shape[1]}")
        x2 = self.fuse(torch.cat([F.relu(branch(x1)) for branch in self.branches], dim=1))
        if self.gate is None:
            return x1 + x2
        return gated_residual(x1, x2, torch.sigmoid(self.gate(x1)))


class Generator(nn.Module):
    """Encoder (4x spatial reduction), block stack, decoder back to full size."""

    def __init__(self, config: GeneratorConfig):
        super().__init__()
        self.config = config
        w = config.base_width
        self.encoder = nn.Sequential(
            nn.Conv2d(config.input_channels, w // 4, 7, stride=1, padding=3),
            nn.ReLU(inplace=True),
            nn.Conv2d(w // 4, w // 2, 4, stride=2, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(w // 2, w, 4, stride=2, padding=1),
            nn.ReLU(inplace=True),
        )
        self.blocks = nn.Sequential(*[AotBlock(config.block) for _ in range(config.num_blocks)])
        self.decoder = nn.Sequential(
            nn.ConvTranspose2d(w, w // 2, 4, stride=2, padding=1),
            nn.ReLU(inplace=True),
            nn.ConvTranspose2d(w // 2, w // 4, 4, stride=2, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(w // 4, config.output_channels, 3, stride=1, padding=1),
        )

    def forward(self, masked_image: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        check_same_spatial(masked_image, mask, "image/mask")
        x = torch.cat([masked_image, mask], dim=1)
        x = self.encoder(x)
        x = self.blocks(x)
        return torch.tanh(self.decoder(x))


def _deterministic_init_(model: nn.Module, seed: int) -> None:
    """Fan-in-scaled uniform init, reproducible bit-for-bit from the seed."""
    gen = torch.Generator().manual_seed(seed)
    for name, param in model.named_parameters():
        if param.ndim >= 2:
            fan_in = param[0].numel()
            bound = math.sqrt(6.0 / fan_in)
            with torch.no_grad():
                param.uniform_(-bound, bound, generator=gen)
        else:
            with torch.no_grad():
                param.zero_()


def build_generator(config: GeneratorConfig, seed: int) -> Generator:
    model = Generator(config)
    _deterministic_init_(model, seed)
    audit = count_normalization_layers(model)
    if audit:
        raise ConfigError(f"generator must contain no normalization layers, found {audit}")
    return model


def count_normalization_layers(module: nn.Module) -> int:
    """Structural audit: number of normalization submodules anywhere in the tree."""
    return sum(1 for m in module.modules() if isinstance(m, _NORM_TYPES))


def split_transform_param_count(block: AotBlock) -> int:
    """Parameters of the split-transform stage (all branch convolutions)."""
    return sum(p.numel() for branch in block.branches for p in branch.parameters())


def undivided_conv_param_count(width: int, kernel_size: int = 3) -> int:
    """Parameters of the single standard conv the branches collectively replace."""
    return kernel_size * kernel_size * width * width + width


def inpaint(gen: Generator, image: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Compose generator output with the known context.

    Known pixels (mask 0) are copied from the input verbatim; only hole pixels
    come from the generator.
    """
    check_image_batch(image)
    check_mask(mask)
    check_same_spatial(image, mask, "image/mask")
    out = gen(image * (1.0 - mask), mask)
    return compose(image, out, mask)


def compose(image: torch.Tensor, generated: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """z = x on known pixels, generator output on holes (exact copy, not recompute)."""
    return torch.where(mask > 0.5, generated, image)
