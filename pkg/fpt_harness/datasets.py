"""Desk-scale synthetic image classification data.

Each class owns a smooth base pattern: a seeded grid x grid array per channel,
upsampled to the image size with linear interpolation and placed around mid-grey
with the configured contrast. Images are base pattern plus uniform jitter in
[-jitter, jitter] per pixel.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy import ndimage

from fpt_utils.errors import ConfigurationError, GenerationError
from fpt_utils.seeding import derived_rng

logger = logging.getLogger(__name__)


@dataclass
class Dataset:
    images: np.ndarray = field(repr=False)
    labels: np.ndarray = field(repr=False)
    # class base patterns, synthetic data only
    patterns: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 4 or self.images.shape[0] != self.labels.shape[0]:
            raise ConfigurationError(
                f"dataset needs images [N, C, H, W] and N labels, got"
                f" {self.images.shape} and {self.labels.shape}"
            )

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def image_shape(self) -> Tuple[int, int, int]:
        return tuple(self.images.shape[1:])

    def head(self, count: Optional[int]) -> "Dataset":
        if count is None or count >= len(self):
            return self
        return Dataset(self.images[:count], self.labels[:count], self.patterns)


@dataclass
class SyntheticDatasetSpec:
    classes: int = 8
    per_class: int = 25
    image_shape: Tuple[int, int, int] = (3, 32, 32)
    # base seed for the class patterns; jitter streams derive from it per split
    seed: int = 0
    jitter: float = 0.01
    contrast: float = 0.15
    grid: int = 4

    def __post_init__(self):
        self.image_shape = tuple(int(v) for v in self.image_shape)
        if self.classes < 1 or self.per_class < 0:
            raise ConfigurationError(
                f"need classes >= 1 and per_class >= 0, got {self.classes}, {self.per_class}"
            )
        if len(self.image_shape) != 3 or min(self.image_shape) < 1:
            raise ConfigurationError(f"image shape must be C x H x W, got {self.image_shape}")
        if not 0 <= self.jitter < 0.5:
            raise ConfigurationError(f"jitter must lie in [0, 0.5), got {self.jitter}")
        if not 0 < self.contrast <= 0.5 - self.jitter:
            raise ConfigurationError(
                f"contrast must lie in (0, {0.5 - self.jitter}] so pixels stay in [0, 1],"
                f" got {self.contrast}"
            )
        if self.grid < 2:
            raise ConfigurationError(f"grid must be >= 2, got {self.grid}")

    @property
    def separation_margin(self) -> float:
        """Pairwise base-pattern L2 distance must exceed this: 4x the L2 norm of the
        largest jitter vector, so nearest-pattern classification is exact."""
        return 4.0 * self.jitter * np.sqrt(np.prod(self.image_shape))


def base_patterns(spec: SyntheticDatasetSpec) -> np.ndarray:
    channels, height, width = spec.image_shape
    rng = derived_rng(spec.seed, "dataset-pattern")
    coarse = rng.uniform(-1.0, 1.0, size=(spec.classes, channels, spec.grid, spec.grid))
    zoomed = ndimage.zoom(
        coarse, (1.0, 1.0, height / spec.grid, width / spec.grid), order=1, mode="nearest"
    )[:, :, :height, :width]
    return 0.5 + spec.contrast * np.clip(zoomed, -1.0, 1.0)


def check_separation(patterns: np.ndarray, margin: float):
    flat = patterns.reshape(patterns.shape[0], -1)
    for i in range(len(flat)):
        for j in range(i + 1, len(flat)):
            distance = float(np.linalg.norm(flat[i] - flat[j]))
            if distance <= margin:
                raise GenerationError(
                    f"class patterns {i} and {j} are {distance:.4f} apart, need more"
                    f" than {margin:.4f}; lower the jitter or raise the contrast"
                )


def generate_synthetic(spec: SyntheticDatasetSpec, split: str = "train") -> Dataset:
    """Balanced dataset, labels in blocks [0]*n + [1]*n + ...

    The same spec and split give identical bytes. Train and eval splits share the
    class patterns but draw independent jitter.

    Raises:
        GenerationError: when two class patterns are too close for the jitter.
    """
    if split not in ("train", "eval"):
        raise ConfigurationError(f"split must be train or eval, got '{split}'")
    patterns = base_patterns(spec)
    check_separation(patterns, spec.separation_margin)

    labels = np.repeat(np.arange(spec.classes), spec.per_class)
    rng = derived_rng(spec.seed, f"dataset-{split}")
    noise = rng.uniform(-spec.jitter, spec.jitter, size=(len(labels),) + spec.image_shape)
    images = np.clip(patterns[labels] + noise, 0.0, 1.0)
    logger.debug(f"generated {len(labels)} {split} images of shape {spec.image_shape}")
    return Dataset(images, labels, patterns)


def nearest_pattern(dataset: Dataset) -> np.ndarray:
    """Oracle classifier: index of the closest class pattern for every image."""
    flat = dataset.images.reshape(len(dataset), -1)
    patterns = dataset.patterns.reshape(dataset.patterns.shape[0], -1)
    distances = np.linalg.norm(flat[:, None, :] - patterns[None, :, :], axis=2)
    return np.argmin(distances, axis=1)
