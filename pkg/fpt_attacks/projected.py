"""FGSM and PGD under an L-inf budget, following the usual sign-gradient recipe."""

import logging

import numpy as np

from fpt_encoders import FeatureEncoder, PrototypeClassifier, check_image
from fpt_utils.constants import AttackKind
from fpt_utils.seeding import make_rng

from .config import AttackConfig
from .gradient import classification_loss, loss_and_input_gradient

logger = logging.getLogger(__name__)


def project(image: np.ndarray, candidate: np.ndarray, epsilon: float) -> np.ndarray:
    """Project onto the epsilon L-inf ball around `image`, then onto [0, 1]."""
    delta = np.clip(candidate - image, -epsilon, epsilon)
    return np.clip(image + delta, 0.0, 1.0)


def fgsm(
    image: np.ndarray,
    label: int,
    encoder: FeatureEncoder,
    clf: PrototypeClassifier,
    epsilon: float,
) -> np.ndarray:
    """x' = clip(x + epsilon * sign(grad_x L), 0, 1)."""
    image = check_image(encoder, image)
    if epsilon == 0:
        return np.array(image)
    _, grad = loss_and_input_gradient(encoder, clf, image, label)
    return np.clip(image + epsilon * np.sign(grad), 0.0, 1.0)


def pgd(
    image: np.ndarray,
    label: int,
    encoder: FeatureEncoder,
    clf: PrototypeClassifier,
    cfg: AttackConfig,
) -> np.ndarray:
    """Iterated sign-gradient ascent with per-step projection.

    The best-loss iterate seen (start included) is returned; when the final iterate
    ties or beats every earlier one, the final iterate is returned.
    """
    image = check_image(encoder, image)
    epsilon = cfg.epsilon
    if epsilon == 0:
        return np.array(image)
    step_size = cfg.resolved_step_size

    if cfg.seed is not None:
        start = make_rng(cfg.seed).uniform(-epsilon, epsilon, size=image.shape)
        current = project(image, image + start, epsilon)
    else:
        current = np.array(image)

    best, best_loss = None, -np.inf
    for _ in range(cfg.steps):
        loss, grad = loss_and_input_gradient(encoder, clf, current, label)
        if loss > best_loss:
            best, best_loss = current, loss
        current = project(image, current + step_size * np.sign(grad), epsilon)

    final_loss = classification_loss(encoder, clf, current, label)
    if final_loss >= best_loss:
        return current
    logger.debug(f"PGD kept an earlier iterate (loss {best_loss:.4f} > {final_loss:.4f})")
    return best


def attack(
    image: np.ndarray,
    label: int,
    encoder: FeatureEncoder,
    clf: PrototypeClassifier,
    cfg: AttackConfig,
) -> np.ndarray:
    if cfg.kind == AttackKind.FGSM:
        return fgsm(image, label, encoder, clf, cfg.epsilon)
    return pgd(image, label, encoder, clf, cfg)
