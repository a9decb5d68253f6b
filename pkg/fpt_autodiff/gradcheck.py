"""Central finite-difference checks for the tape."""

from typing import Callable

import numpy as np

from .graph import Graph, Tensor

# Builds a scalar loss from one input tensor on a fresh graph
LossBuilder = Callable[[Graph, Tensor], Tensor]


def numerical_gradient(
    fn: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-5
) -> np.ndarray:
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat_x = x.reshape(-1)
    flat_grad = grad.reshape(-1)
    for i in range(flat_x.size):
        original = flat_x[i]
        flat_x[i] = original + h
        upper = fn(x)
        flat_x[i] = original - h
        lower = fn(x)
        flat_x[i] = original
        flat_grad[i] = (upper - lower) / (2.0 * h)
    return grad


def analytic_gradient(build: LossBuilder, x: np.ndarray) -> np.ndarray:
    graph = Graph()
    leaf = graph.leaf(x, requires_grad=True)
    loss = build(graph, leaf)
    return graph.backward(loss)[leaf]


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """||a - n|| / max(||a||, ||n||), floored so two zero gradients compare equal."""
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    return float(np.linalg.norm(analytic - numeric) / scale)


def gradcheck(build: LossBuilder, x: np.ndarray, h: float = 1e-5) -> float:
    """Return the relative error between backward-pass and central-difference
    gradients of `build` at `x`."""

    def evaluate(point: np.ndarray) -> float:
        graph = Graph()
        return build(graph, graph.leaf(point)).item()

    return relative_error(analytic_gradient(build, x), numerical_gradient(evaluate, x, h))
