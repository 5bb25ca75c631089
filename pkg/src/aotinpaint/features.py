"""Frozen convolutional feature extractor for perceptual, style and FID metrics.

The topology mirrors the VGG19 feature stack (five stages of 3x3 convolutions,
each followed by a 2x max-pool). Weights come from a local tensor archive when
one is available (``AOT_CACHE_DIR``), otherwise a fixed-seed random
initialization of the same topology keeps the whole test suite hermetic.
Parameters are never trained.
"""

from __future__ import annotations

import hashlib
import os
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ConfigError
from .generator import _deterministic_init_

VGG19_STAGE_WIDTHS = (64, 128, 256, 512, 512)
VGG19_STAGE_CONVS = (2, 2, 4, 4, 4)
WEIGHTS_FILENAME = "vgg19_features.npz"
CACHE_ENV_VAR = "AOT_CACHE_DIR"

# ImageNet statistics, applied after mapping [-1, 1] inputs to [0, 1].
_MEAN = (0.485, 0.456, 0.406)
_STD = (0.229, 0.224, 0.225)


def default_taps(stage_convs=VGG19_STAGE_CONVS) -> tuple[str, ...]:
    """Deepest post-rectifier activation at each resolution scale."""
    return tuple(f"relu{i + 1}_{n}" for i, n in enumerate(stage_convs))


class FeatureExtractor(nn.Module):
    """Multi-tap frozen extractor.

    source:
        "pretrained_file" - load weights from `weights_path` (or the cache dir),
        "fixed_random"    - deterministic random weights from `seed`,
        "auto"            - pretrained file when present, else fixed_random.
    """

    def __init__(
        self,
        source: str = "auto",
        taps: tuple[str, ...] | None = None,
        stage_widths: tuple[int, ...] = VGG19_STAGE_WIDTHS,
        stage_convs: tuple[int, ...] = VGG19_STAGE_CONVS,
        seed: int = 0,
        weights_path: str | os.PathLike | None = None,
    ):
        super().__init__()
        if len(stage_widths) != len(stage_convs):
            raise ConfigError("stage_widths and stage_convs must have equal length")
        self.stage_widths = tuple(stage_widths)
        self.stage_convs = tuple(stage_convs)
        self.taps = tuple(taps) if taps is not None else default_taps(stage_convs)
        self._layer_names: list[str] = []
        seq: list[nn.Module] = []
        c_in = 3
        for i, (w, n) in enumerate(zip(stage_widths, stage_convs)):
            for j in range(n):
                seq.append(nn.Conv2d(c_in, w, 3, padding=1))
                self._layer_names.append(f"conv{i + 1}_{j + 1}")
                seq.append(nn.ReLU())
                self._layer_names.append(f"relu{i + 1}_{j + 1}")
                c_in = w
            seq.append(nn.MaxPool2d(2))
            self._layer_names.append(f"pool{i + 1}")
        self.layers = nn.ModuleList(seq)
        unknown = set(self.taps) - set(self._layer_names)
        if unknown:
            raise ConfigError(f"unknown tap names {sorted(unknown)}")

        path = self._resolve_weights(source, weights_path)
        if path is not None:
            self.load_weights(path)
            self.source = "pretrained_file"
        else:
            _deterministic_init_(self, seed)
            self.source = "fixed_random"
        self.seed = seed
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()

    @staticmethod
    def _resolve_weights(source, weights_path):
        if source == "fixed_random":
            return None
        if weights_path is not None:
            if Path(weights_path).exists():
                return Path(weights_path)
            if source == "pretrained_file":
                raise FileNotFoundError(f"extractor weights not found at {weights_path}")
            return None
        cache = os.environ.get(CACHE_ENV_VAR)
        candidate = Path(cache) / WEIGHTS_FILENAME if cache else None
        if candidate is not None and candidate.exists():
            return candidate
        if source == "pretrained_file":
            raise FileNotFoundError(
                f"no extractor weights; set {CACHE_ENV_VAR} or pass weights_path"
            )
        return None

    @property
    def min_input_size(self) -> int:
        return 2 ** len(self.stage_widths)

    def named_convs(self):
        for name, layer in zip(self._layer_names, self.layers):
            if isinstance(layer, nn.Conv2d):
                yield name, layer

    def load_weights(self, path) -> None:
        """Load a named-tensor archive (float32 arrays keyed 'convN_M.weight/.bias')."""
        archive = np.load(path)
        with torch.no_grad():
            for name, conv in self.named_convs():
                for part in ("weight", "bias"):
                    key = f"{name}.{part}"
                    if key not in archive:
                        raise ConfigError(f"weights file {path} missing tensor {key}")
                    arr = archive[key]
                    target = getattr(conv, part)
                    if tuple(arr.shape) != tuple(target.shape):
                        raise ConfigError(
                            f"{key}: shape {arr.shape} does not match topology {tuple(target.shape)}"
                        )
                    target.copy_(torch.from_numpy(arr.astype(np.float32)))

    def save_weights(self, path) -> None:
        """Write the documented archive: float32 little-endian named tensors."""
        tensors = {}
        for name, conv in self.named_convs():
            tensors[f"{name}.weight"] = conv.weight.detach().numpy().astype("<f4")
            tensors[f"{name}.bias"] = conv.bias.detach().numpy().astype("<f4")
        np.savez(path, **tensors)

    def fingerprint(self) -> str:
        """Stable digest of all parameters; labels FID reports and frozenness checks."""
        h = hashlib.sha256()
        for name, p in sorted(self.state_dict().items()):
            h.update(name.encode())
            h.update(p.detach().numpy().astype("<f4").tobytes())
        return h.hexdigest()[:16]

    def _prepare(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-1] < self.min_input_size or x.shape[-2] < self.min_input_size:
            raise ValueError(
                f"input {tuple(x.shape[-2:])} below extractor minimum {self.min_input_size}"
            )
        mean = torch.tensor(_MEAN, dtype=x.dtype, device=x.device).view(1, 3, 1, 1)
        std = torch.tensor(_STD, dtype=x.dtype, device=x.device).view(1, 3, 1, 1)
        return ((x + 1.0) * 0.5 - mean) / std

    def forward(self, x: torch.Tensor) -> list[torch.Tensor]:
        """Activations at the configured taps, in tap order. Input in [-1, 1]."""
        out = self._prepare(x)
        wanted = {name: i for i, name in enumerate(self.taps)}
        acts: list[torch.Tensor | None] = [None] * len(self.taps)
        remaining = len(self.taps)
        for name, layer in zip(self._layer_names, self.layers):
            out = layer(out)
            if name in wanted:
                acts[wanted[name]] = out
                remaining -= 1
                if not remaining:
                    break
        return acts  # type: ignore[return-value]

    def pooled_features(self, x: torch.Tensor) -> torch.Tensor:
        """Global-average-pooled deepest tap, one row per sample (for FID)."""
        deep = self.forward(x)[-1]
        return F.adaptive_avg_pool2d(deep, 1).flatten(1)
