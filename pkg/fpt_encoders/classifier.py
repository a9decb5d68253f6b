"""Cosine-similarity zero-shot head. Fixed unit-norm class prototypes take the place of
text-prompt embeddings; logits_i = temperature * cos(feature, prototype_i)."""

from dataclasses import dataclass, field

import numpy as np

from fpt_autodiff import Tensor, ops
from fpt_utils.errors import ConfigurationError, InputError
from fpt_utils.seeding import make_rng

DEFAULT_TEMPERATURE = 20.0


@dataclass
class PrototypeClassifier:
    prototypes: np.ndarray = field(repr=False)
    temperature: float = DEFAULT_TEMPERATURE

    def __post_init__(self):
        self.prototypes = np.array(self.prototypes, dtype=np.float64)
        if self.prototypes.ndim != 2 or self.prototypes.shape[0] < 1:
            raise ConfigurationError(
                f"prototypes must be a K x F matrix, got {self.prototypes.shape}"
            )
        norms = np.linalg.norm(self.prototypes, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ConfigurationError(f"prototypes must have unit L2 norm, got {norms}")
        if not self.temperature > 0:
            raise ConfigurationError(f"temperature must be positive, got {self.temperature}")

    @property
    def num_classes(self) -> int:
        return self.prototypes.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.prototypes.shape[1]

    @classmethod
    def from_seed(
        cls,
        num_classes: int,
        feature_dim: int,
        temperature: float = DEFAULT_TEMPERATURE,
        seed: int = 0,
    ) -> "PrototypeClassifier":
        raw = make_rng(seed).normal(size=(num_classes, feature_dim))
        return cls(raw / np.linalg.norm(raw, axis=1, keepdims=True), temperature)


def classify(clf: PrototypeClassifier, feature: np.ndarray) -> np.ndarray:
    """Logits of one feature vector.

    Raises:
        InputError: for a zero feature (cosine undefined) or a wrong dimension.
    """
    feature = np.asarray(feature, dtype=np.float64).reshape(-1)
    if feature.shape[0] != clf.feature_dim:
        raise InputError(f"feature has dim {feature.shape[0]}, classifier expects {clf.feature_dim}")
    norm = np.linalg.norm(feature)
    if norm == 0:
        raise InputError("cannot classify a zero feature vector")
    return clf.temperature * (clf.prototypes @ (feature / norm))


def classify_batch(clf: PrototypeClassifier, features: np.ndarray) -> np.ndarray:
    return np.stack([classify(clf, feature) for feature in np.atleast_2d(features)])


def predict(clf: PrototypeClassifier, features: np.ndarray) -> np.ndarray:
    return np.argmax(classify_batch(clf, features), axis=1)


def cosine_logits(clf: PrototypeClassifier, features: Tensor) -> Tensor:
    """Differentiable logits for features [N, F] -> [N, K]."""
    norms = ops.l2_norm(features, axis=1, keepdims=True)
    unit = ops.div(features, norms)
    return ops.mul(ops.matmul(unit, clf.prototypes.T), clf.temperature)
