"""Input validation helpers used by the estimator API and the core modules."""

from __future__ import annotations

import numpy as np
import torch

from .errors import ShapeMismatchError


def as_image_tensor(x) -> torch.Tensor:
    """Coerce an array-like to a float32 (B, C, H, W) tensor.

    Accepts torch tensors, numpy arrays and nested lists. A rank-3 input is
    treated as a single sample and gains a batch axis. uint8 inputs are
    rescaled from [0, 255] to [-1, 1]; floating inputs are passed through.
    """
    if isinstance(x, torch.Tensor):
        t = x
    else:
        t = torch.as_tensor(np.asarray(x))
    if t.dtype == torch.uint8:
        t = t.to(torch.float32) / 255.0 * 2.0 - 1.0
    t = t.to(torch.float32)
    if t.ndim == 3:
        t = t.unsqueeze(0)
    if t.ndim != 4:
        raise ShapeMismatchError(f"expected rank-3 or rank-4 input, got shape {tuple(t.shape)}")
    return t


def check_image_batch(x: torch.Tensor, name: str = "image") -> torch.Tensor:
    """Validate a (B, 3, H, W) float batch with values in [-1, 1]."""
    if x.ndim != 4:
        raise ShapeMismatchError(f"{name}: expected rank-4 (B, C, H, W), got {tuple(x.shape)}")
    if not x.is_floating_point():
        raise ShapeMismatchError(f"{name}: expected floating dtype, got {x.dtype}")
    lo, hi = float(x.min()) if x.numel() else 0.0, float(x.max()) if x.numel() else 0.0
    if lo < -1.0 - 1e-4 or hi > 1.0 + 1e-4:
        raise ValueError(f"{name}: values must lie in [-1, 1], got range [{lo:.4f}, {hi:.4f}]")
    return x


def check_mask(mask: torch.Tensor, name: str = "mask") -> torch.Tensor:
    """Validate a (B, 1, H, W) binary mask (1 = hole, 0 = known)."""
    if mask.ndim != 4 or mask.shape[1] != 1:
        raise ShapeMismatchError(f"{name}: expected rank-4 (B, 1, H, W), got {tuple(mask.shape)}")
    if not torch.all((mask == 0) | (mask == 1)):
        raise ValueError(f"{name}: every element must be exactly 0 or 1")
    return mask


def check_same_spatial(a: torch.Tensor, b: torch.Tensor, names: str = "inputs") -> None:
    """Require matching spatial (H, W) dims."""
    if a.shape[-2:] != b.shape[-2:]:
        raise ShapeMismatchError(
            f"{names}: spatial sizes differ, {tuple(a.shape[-2:])} vs {tuple(b.shape[-2:])}"
        )


def check_same_shape(a: torch.Tensor, b: torch.Tensor, names: str = "inputs") -> None:
    if a.shape != b.shape:
        raise ShapeMismatchError(f"{names}: shapes differ, {tuple(a.shape)} vs {tuple(b.shape)}")
