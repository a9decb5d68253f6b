"""Drift-based thresholds. Drift is ||f(X + delta) - f(X)||; probes are uniform per
pixel in [-eps, eps] and X + delta is clipped to [0, 1] before encoding."""

from typing import Optional

import numpy as np

from fpt_encoders import FeatureEncoder, check_image, encode
from fpt_utils.errors import DegenerateFeatureError

from .config import DefenseConfig


def _anchor(encoder: FeatureEncoder, image: np.ndarray, anchor: Optional[np.ndarray]):
    feature = encode(encoder, image) if anchor is None else np.asarray(anchor, dtype=np.float64)
    norm = float(np.linalg.norm(feature))
    if norm == 0:
        raise DegenerateFeatureError("||f(X)|| is zero, drift ratios are undefined")
    return feature, norm


def feature_drift(
    encoder: FeatureEncoder, image: np.ndarray, delta: np.ndarray, anchor: np.ndarray
) -> float:
    probed = np.clip(image + delta, 0.0, 1.0)
    return float(np.linalg.norm(encode(encoder, probed) - anchor))


def uniform_probe(rng: np.random.Generator, shape, epsilon: float) -> np.ndarray:
    return epsilon * rng.uniform(-1.0, 1.0, size=shape)


def feature_perception_threshold(
    encoder: FeatureEncoder,
    image: np.ndarray,
    delta_small: np.ndarray,
    delta_large: np.ndarray,
    anchor: Optional[np.ndarray] = None,
) -> float:
    """tau = (drift(delta_large) - drift(delta_small)) / ||f(X)|| for given probes."""
    image = check_image(encoder, image)
    feature, norm = _anchor(encoder, image, anchor)
    large = feature_drift(encoder, image, delta_large, feature)
    small = feature_drift(encoder, image, delta_small, feature)
    return (large - small) / norm


def compute_fpt(
    encoder: FeatureEncoder,
    image: np.ndarray,
    cfg: DefenseConfig,
    rng: np.random.Generator,
    anchor: Optional[np.ndarray] = None,
    shared_draw: bool = False,
) -> float:
    """Feature perception threshold of one image.

    The small probe is drawn first, then the large one. With `shared_draw` both
    probes scale one uniform draw, so equal budgets give tau == 0.

    Raises:
        DegenerateFeatureError: when ||f(X)|| is zero.
    """
    image = check_image(encoder, image)
    unit_small = rng.uniform(-1.0, 1.0, size=image.shape)
    unit_large = unit_small if shared_draw else rng.uniform(-1.0, 1.0, size=image.shape)
    return feature_perception_threshold(
        encoder,
        image,
        cfg.probe_eps_small * unit_small,
        cfg.probe_eps_large * unit_large,
        anchor,
    )


def ttc_threshold(
    encoder: FeatureEncoder,
    image: np.ndarray,
    delta: np.ndarray,
    anchor: Optional[np.ndarray] = None,
) -> float:
    """Single-probe drift ratio drift(delta) / ||f(X)||."""
    image = check_image(encoder, image)
    feature, norm = _anchor(encoder, image, anchor)
    return feature_drift(encoder, image, delta, feature) / norm


def compute_ttc_tau(
    encoder: FeatureEncoder,
    image: np.ndarray,
    probe_eps: float,
    rng: np.random.Generator,
    anchor: Optional[np.ndarray] = None,
) -> float:
    image = check_image(encoder, image)
    return ttc_threshold(encoder, image, uniform_probe(rng, image.shape, probe_eps), anchor)
