"""Scikit-learn style estimator wrapping the trainer and the inpainting path.

``fit`` trains the generator on an image corpus; ``predict`` composes
inpaintings for (image, mask) pairs. Hyperparameters follow the sklearn
convention (stored verbatim in ``__init__``, fitted artifacts get a trailing
underscore), so the estimator works with ``get_params``/``set_params``,
``clone`` and pipelines.
"""

from __future__ import annotations

import numpy as np
import torch
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import metrics as metrics_mod
from .config import TrainConfig
from .data import ArraySource, ImageSource, source_from_dir
from .errors import ShapeMismatchError
from .generator import GeneratorConfig, inpaint
from .trainer import load_checkpoint, save_checkpoint, train
from .validation import as_image_tensor, check_mask


class AotInpainter(BaseEstimator):
    """Trainable free-form inpainter with a fit/predict surface.

    Parameters mirror the training recipe: loss weights, Adam betas and the
    fixed learning rate default to the published values; geometry defaults to
    the desk-scale preset so fitting is feasible on a CPU.
    """

    def __init__(
        self,
        image_size: int = 64,
        base_width: int = 64,
        num_blocks: int = 8,
        rates: tuple[int, ...] = (1, 2, 4, 8),
        residual_mode: str = "gated",
        target_mode: str = "sm",
        spectral_norm: bool = True,
        steps: int = 200,
        batch_size: int = 8,
        lr: float = 1e-4,
        adam_beta1: float = 0.0,
        adam_beta2: float = 0.9,
        lambda_adv: float = 0.01,
        lambda_rec: float = 1.0,
        lambda_per: float = 0.1,
        lambda_sty: float = 250.0,
        mask_kernel_size: int = 70,
        seed: int = 0,
        extractor_source: str = "auto",
        verbose: int = 0,
    ):
        self.image_size = image_size
        self.base_width = base_width
        self.num_blocks = num_blocks
        self.rates = rates
        self.residual_mode = residual_mode
        self.target_mode = target_mode
        self.spectral_norm = spectral_norm
        self.steps = steps
        self.batch_size = batch_size
        self.lr = lr
        self.adam_beta1 = adam_beta1
        self.adam_beta2 = adam_beta2
        self.lambda_adv = lambda_adv
        self.lambda_rec = lambda_rec
        self.lambda_per = lambda_per
        self.lambda_sty = lambda_sty
        self.mask_kernel_size = mask_kernel_size
        self.seed = seed
        self.extractor_source = extractor_source
        self.verbose = verbose

    def _train_config(self) -> TrainConfig:
        from .discriminator import DiscriminatorConfig
        from .losses import LossWeights

        return TrainConfig(
            seed=self.seed,
            batch_size=self.batch_size,
            steps=self.steps,
            lr=self.lr,
            adam_beta1=self.adam_beta1,
            adam_beta2=self.adam_beta2,
            image_size=self.image_size,
            checkpoint_every=0,
            generator=GeneratorConfig.desk(
                base_width=self.base_width,
                num_blocks=self.num_blocks,
                rates=tuple(self.rates),
                residual_mode=self.residual_mode,
            ),
            discriminator=DiscriminatorConfig(
                target_mode=self.target_mode, spectral_norm=self.spectral_norm
            ),
            losses=LossWeights(
                lambda_adv=self.lambda_adv,
                lambda_rec=self.lambda_rec,
                lambda_per=self.lambda_per,
                lambda_sty=self.lambda_sty,
            ),
            mask_kernel_size=self.mask_kernel_size,
            extractor_source=self.extractor_source,
        )

    def _coerce_dataset(self, X):
        if isinstance(X, (ImageSource, ArraySource)):
            return X
        if isinstance(X, (str, bytes)) or hasattr(X, "__fspath__"):
            return source_from_dir(X, target_size=self.image_size)
        images = self._coerce_images(X)
        if images.shape[-1] != self.image_size or images.shape[-2] != self.image_size:
            raise ShapeMismatchError(
                f"images are {tuple(images.shape[-2:])}, estimator expects "
                f"{self.image_size}x{self.image_size}"
            )
        return ArraySource(images)

    @staticmethod
    def _coerce_images(X) -> torch.Tensor:
        arr = X
        if isinstance(arr, np.ndarray) and arr.ndim == 4 and arr.shape[-1] == 3 and arr.shape[1] != 3:
            arr = np.moveaxis(arr, -1, 1)  # channel-last to channel-first
        return as_image_tensor(arr)

    @staticmethod
    def _coerce_masks(masks, like: torch.Tensor) -> torch.Tensor:
        m = masks
        if isinstance(m, np.ndarray) and m.dtype == np.uint8:
            m = (m >= 128).astype(np.float32)
        m = torch.as_tensor(np.asarray(m) if not isinstance(m, torch.Tensor) else m)
        if m.dtype == torch.uint8:
            m = (m >= 128)
        m = m.to(torch.float32)
        if m.ndim == 3:
            m = m.unsqueeze(1)
        if m.shape[0] != like.shape[0]:
            raise ShapeMismatchError(f"{m.shape[0]} masks for {like.shape[0]} images")
        return check_mask(m)

    def fit(self, X, y=None):
        """Train the generator on an image corpus.

        X may be a directory path, an ImageSource/ArraySource, a uint8
        (N, H, W, 3) array, or a float (N, 3, H, W) array in [-1, 1].
        """
        dataset = self._coerce_dataset(X)
        state = train(
            self._train_config(), dataset, log_every=50 if self.verbose else 0
        )
        self.train_state_ = state
        self.generator_ = state.gen.eval()
        self.history_ = list(state.history)
        self.n_images_ = len(dataset)
        return self

    def _check_fitted(self):
        if not hasattr(self, "generator_"):
            raise NotFittedError("this AotInpainter instance is not fitted yet; call fit first")

    def predict(self, X, masks):
        """Inpaint each image under its mask; known pixels pass through exactly."""
        self._check_fitted()
        numpy_in = not isinstance(X, torch.Tensor)
        channel_last = isinstance(X, np.ndarray) and X.ndim == 4 and X.shape[-1] == 3 and X.shape[1] != 3
        images = self._coerce_images(X)
        m = self._coerce_masks(masks, images)
        with torch.no_grad():
            z = inpaint(self.generator_, images, m)
        if not numpy_in:
            return z
        out = z.numpy()
        return np.moveaxis(out, 1, -1) if channel_last else out

    def transform(self, X):
        """Pipeline form of predict: X is (N, 4, H, W) with the mask as channel 3."""
        images = as_image_tensor(X)
        if images.shape[1] != 4:
            raise ShapeMismatchError("transform expects 4 channels (RGB + mask)")
        rgb = images[:, :3]
        mask = (images[:, 3:4] > 0.0).to(torch.float32)
        return self.predict(rgb, mask)

    def score(self, X, masks) -> float:
        """Mean PSNR (dB) of composed outputs against the originals."""
        self._check_fitted()
        images = self._coerce_images(X)
        m = self._coerce_masks(masks, images)
        with torch.no_grad():
            z = inpaint(self.generator_, images, m)
        return float(metrics_mod.psnr(images, z).mean())

    def save(self, path):
        self._check_fitted()
        return save_checkpoint(self.train_state_, path)

    @classmethod
    def load(cls, path) -> "AotInpainter":
        state = load_checkpoint(path)
        cfg = state.config
        est = cls(
            image_size=cfg.image_size,
            base_width=cfg.generator.base_width,
            num_blocks=cfg.generator.num_blocks,
            rates=cfg.generator.block.rates,
            residual_mode=cfg.generator.block.residual_mode,
            target_mode=cfg.discriminator.target_mode,
            spectral_norm=cfg.discriminator.spectral_norm,
            steps=cfg.steps,
            batch_size=cfg.batch_size,
            lr=cfg.lr,
            adam_beta1=cfg.adam_beta1,
            adam_beta2=cfg.adam_beta2,
            lambda_adv=cfg.losses.lambda_adv,
            lambda_rec=cfg.losses.lambda_rec,
            lambda_per=cfg.losses.lambda_per,
            lambda_sty=cfg.losses.lambda_sty,
            mask_kernel_size=cfg.mask_kernel_size,
            seed=cfg.seed,
            extractor_source=cfg.extractor_source,
        )
        est.train_state_ = state
        est.generator_ = state.gen.eval()
        est.history_ = list(state.history)
        est.n_images_ = 0
        return est
