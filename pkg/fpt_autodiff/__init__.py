from . import ops
from .functional import (
    AttentionWeights,
    cross_entropy,
    l2_norm,
    layer_norm,
    linear,
    multi_head_attention,
    relu,
    softmax,
)
from .graph import GradientResult, Graph, Node, Tensor

__all__ = [
    "AttentionWeights",
    "backward",
    "GradientResult",
    "Graph",
    "Node",
    "Tensor",
    "cross_entropy",
    "l2_norm",
    "layer_norm",
    "linear",
    "multi_head_attention",
    "ops",
    "relu",
    "softmax",
]


def backward(loss: Tensor) -> GradientResult:
    return loss.graph.backward(loss)
