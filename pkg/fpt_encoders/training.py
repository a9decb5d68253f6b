import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Union

import numpy as np

from fpt_autodiff import Graph, ops
from fpt_utils.errors import ConfigurationError, InputError, TrainingError
from fpt_utils.seeding import make_rng

from .base import check_images, encode_batch
from .classifier import PrototypeClassifier, cosine_logits
from .linear import LinearEncoderParams
from .transforms import center_crop_rescale, hflip
from .vit import EncoderParams

logger = logging.getLogger(__name__)

Params = Union[EncoderParams, LinearEncoderParams]


@dataclass
class TrainConfig:
    epochs: int = 8
    batch_size: int = 16
    learning_rate: float = 0.05
    momentum: float = 0.9
    seed: int = 0
    # random horizontal flip / center-crop-rescale, matching the TTE members
    augment: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch size must be >= 1, got {self.batch_size}")
        # zero is accepted and leaves the weights untouched
        if self.learning_rate < 0:
            raise ConfigurationError(f"learning rate must be >= 0, got {self.learning_rate}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigurationError(f"momentum must lie in [0, 1), got {self.momentum}")


@dataclass
class TrainResult:
    params: Params
    train_accuracy: float
    losses: List[float] = field(default_factory=list)


def accuracy(
    params: Params, clf: PrototypeClassifier, images: np.ndarray, labels: Sequence[int],
    chunk: int = 64,
) -> float:
    labels = np.asarray(labels)
    if labels.size == 0:
        return 0.0
    correct = 0
    for start in range(0, len(labels), chunk):
        features = encode_batch(params, images[start : start + chunk])
        norms = np.linalg.norm(features, axis=1, keepdims=True)
        logits = (features / np.where(norms > 0, norms, 1.0)) @ clf.prototypes.T
        correct += int(np.sum(np.argmax(logits, axis=1) == labels[start : start + chunk]))
    return correct / len(labels)


def _augment(batch: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    out = np.array(batch)
    for i in range(out.shape[0]):
        if rng.random() < 0.5:
            out[i] = hflip(out[i])
        if rng.random() < 0.25:
            out[i] = center_crop_rescale(out[i])
    return out


def train_encoder(
    enc: Params,
    clf: PrototypeClassifier,
    dataset,
    cfg: TrainConfig,
) -> TrainResult:
    """Minimize cross-entropy over cosine logits with SGD + momentum. Prototypes stay
    fixed; only encoder weights move.

    Args:
        enc: initial encoder weights (left untouched; a trained copy is returned).
        clf: the fixed prototype head.
        dataset: anything with `images` [N, C, H, W] and `labels` [N].
        cfg: optimizer settings.

    Raises:
        InputError: for an empty dataset or labels outside [0, K).
        TrainingError: when the loss stops being finite.
    """
    images = check_images(enc, dataset.images)
    labels = np.asarray(dataset.labels, dtype=np.int64)
    if len(labels) == 0:
        raise InputError("cannot train on an empty dataset")
    if labels.min() < 0 or labels.max() >= clf.num_classes:
        raise InputError(f"labels must lie in [0, {clf.num_classes})")

    rng = make_rng(cfg.seed)
    tensors: Dict[str, np.ndarray] = {k: np.array(v) for k, v in enc.tensors.items()}
    velocity = {k: np.zeros_like(v) for k, v in tensors.items()}
    current = enc.with_tensors(tensors)
    losses: List[float] = []
    step = 0

    for epoch in range(cfg.epochs):
        order = rng.permutation(len(labels))
        epoch_losses = []
        for start in range(0, len(order), cfg.batch_size):
            index = order[start : start + cfg.batch_size]
            batch = images[index]
            if cfg.augment:
                batch = _augment(batch, rng)

            graph = Graph()
            leaves = current.bind(graph, requires_grad=True)
            features = current.forward(graph, graph.leaf(batch), leaves)
            loss = ops.cross_entropy(cosine_logits(clf, features), labels[index])
            loss_value = loss.item()
            if not np.isfinite(loss_value):
                raise TrainingError("training loss diverged", step)
            grads = graph.backward(loss)

            for name, leaf in leaves.items():
                velocity[name] = cfg.momentum * velocity[name] + grads[leaf]
                tensors[name] = tensors[name] - cfg.learning_rate * velocity[name]
            current = enc.with_tensors(tensors)
            epoch_losses.append(loss_value)
            losses.append(loss_value)
            step += 1

        logger.info(
            f"epoch {epoch + 1}/{cfg.epochs}: mean loss {np.mean(epoch_losses):.4f}"
        )

    train_accuracy = accuracy(current, clf, images, labels)
    logger.info(f"Training finished after {step} steps, train accuracy {train_accuracy:.3f}")
    return TrainResult(current, train_accuracy, losses)
