from typing import Tuple

import numpy as np

from fpt_autodiff import Graph, ops
from fpt_encoders import FeatureEncoder, PrototypeClassifier, cosine_logits


def loss_and_input_gradient(
    encoder: FeatureEncoder, clf: PrototypeClassifier, image: np.ndarray, label: int
) -> Tuple[float, np.ndarray]:
    """Cross-entropy of the cosine logits and its gradient w.r.t. the pixels."""
    graph = Graph()
    x = graph.leaf(image[None], requires_grad=True)
    loss = ops.cross_entropy(cosine_logits(clf, encoder.forward(graph, x)), [label])
    return loss.item(), graph.backward(loss)[x][0]


def classification_loss(
    encoder: FeatureEncoder, clf: PrototypeClassifier, image: np.ndarray, label: int
) -> float:
    graph = Graph()
    x = graph.leaf(image[None])
    return ops.cross_entropy(cosine_logits(clf, encoder.forward(graph, x)), [label]).item()
