"""Reconstruction, perceptual and style losses, and the weighted total objective."""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch

from .errors import DivergenceError
from .features import FeatureExtractor
from .validation import check_same_shape


@dataclass(frozen=True)
class LossWeights:
    lambda_adv: float = 0.01
    lambda_rec: float = 1.0
    lambda_per: float = 0.1
    lambda_sty: float = 250.0

    def __post_init__(self):
        if min(self.lambda_adv, self.lambda_rec, self.lambda_per, self.lambda_sty) < 0:
            raise ValueError("loss weights must be non-negative")


def l1_rec(x: torch.Tensor, g_out: torch.Tensor) -> torch.Tensor:
    """Mean absolute difference between the original image and the raw generator output."""
    check_same_shape(x, g_out, "x/g_out")
    return (x - g_out).abs().mean()


def gram(features: torch.Tensor) -> torch.Tensor:
    """Per-sample channel inner-product matrix, normalized by C*H*W.

    (B, C, H, W) -> (B, C, C). The normalization keeps the style weight of 250
    numerically sane across feature resolutions.
    """
    b, c, h, w = features.shape
    flat = features.reshape(b, c, h * w)
    return flat @ flat.transpose(1, 2) / (c * h * w)


def perceptual(x: torch.Tensor, z: torch.Tensor, fx: FeatureExtractor) -> torch.Tensor:
    """Sum over taps of the per-element mean absolute activation difference."""
    feats_x = fx(x)
    feats_z = fx(z)
    return sum((a - b).abs().mean() for a, b in zip(feats_x, feats_z))


def style(x: torch.Tensor, z: torch.Tensor, fx: FeatureExtractor) -> torch.Tensor:
    """Mean over taps of the mean absolute difference between Gram matrices."""
    feats_x = fx(x)
    feats_z = fx(z)
    per_tap = [(gram(a) - gram(b)).abs().mean() for a, b in zip(feats_x, feats_z)]
    return sum(per_tap) / len(per_tap)


def perceptual_and_style(
    x: torch.Tensor, z: torch.Tensor, fx: FeatureExtractor
) -> tuple[torch.Tensor, torch.Tensor]:
    """Both feature losses from a single extractor pass per input."""
    feats_x = fx(x)
    feats_z = fx(z)
    per = sum((a - b).abs().mean() for a, b in zip(feats_x, feats_z))
    sty_terms = [(gram(a) - gram(b)).abs().mean() for a, b in zip(feats_x, feats_z)]
    return per, sum(sty_terms) / len(sty_terms)


def total_loss(
    adv: torch.Tensor | float,
    rec: torch.Tensor | float,
    per: torch.Tensor | float,
    sty: torch.Tensor | float,
    w: LossWeights,
) -> torch.Tensor:
    """Weighted sum of the four objectives; rejects non-finite components."""
    components = {"adv": adv, "rec": rec, "per": per, "sty": sty}
    for name, value in components.items():
        v = float(value.detach() if isinstance(value, torch.Tensor) else value)
        if not math.isfinite(v):
            raise DivergenceError(f"loss component {name!r} is non-finite ({v})")
    total = w.lambda_adv * adv + w.lambda_rec * rec + w.lambda_per * per + w.lambda_sty * sty
    if not isinstance(total, torch.Tensor):
        total = torch.tensor(float(total), dtype=torch.float64)
    return total
