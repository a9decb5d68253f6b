"""Image transforms shared by training augmentation and test-time ensembling. Images
are C x H x W float arrays in [0, 1]."""

from typing import Callable, Dict

import numpy as np
from scipy import ndimage

from fpt_utils.constants import Tte
from fpt_utils.errors import ConfigurationError

DEFAULT_CROP_FRACTION = 0.875


def hflip(image: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(image[..., ::-1])


def center_crop_rescale(
    image: np.ndarray, fraction: float = DEFAULT_CROP_FRACTION
) -> np.ndarray:
    """Crop the central `fraction` of each spatial side and resize back with linear
    interpolation."""
    _, height, width = image.shape
    crop_h = max(1, int(round(height * fraction)))
    crop_w = max(1, int(round(width * fraction)))
    top = (height - crop_h) // 2
    left = (width - crop_w) // 2
    crop = image[:, top : top + crop_h, left : left + crop_w]
    zoomed = ndimage.zoom(
        crop, (1.0, height / crop_h, width / crop_w), order=1, mode="nearest"
    )
    # zoom rounds the output size; pin it to the input size
    zoomed = zoomed[:, :height, :width]
    return np.clip(zoomed, 0.0, 1.0)


def get_transform(name: str, crop_fraction: float = DEFAULT_CROP_FRACTION) -> Callable:
    transforms: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
        Tte.Identity: lambda image: np.array(image, dtype=np.float64),
        Tte.HFlip: hflip,
        Tte.CenterCrop: lambda image: center_crop_rescale(image, crop_fraction),
        Tte.HFlipCenterCrop: lambda image: hflip(
            center_crop_rescale(image, crop_fraction)
        ),
    }
    if name not in transforms:
        raise ConfigurationError(
            f"unknown transform '{name}', expected one of {sorted(transforms)}"
        )
    return transforms[name]
