"""Primitive ops. Each op computes its forward value with numpy and records a closure
that maps the output gradient to one gradient per input. Array-like arguments are
lifted to constants on the graph of the first tensor argument."""

from typing import Optional, Sequence, Tuple, Union

import numpy as np

from fpt_utils.errors import ConfigurationError, InputError, UsageError

from .graph import Graph, Tensor

Operand = Union[Tensor, np.ndarray, float, int]
Axis = Optional[Union[int, Tuple[int, ...]]]


def _graph_of(*operands: Operand) -> Graph:
    for operand in operands:
        if isinstance(operand, Tensor):
            return operand.graph
    raise UsageError("at least one operand must be a Tensor")


def _lift(graph: Graph, operand: Operand) -> Tensor:
    if isinstance(operand, Tensor):
        return operand
    return graph.constant(operand)


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a: Operand, b: Operand) -> Tensor:
    graph = _graph_of(a, b)
    a, b = _lift(graph, a), _lift(graph, b)
    sa, sb = a.shape, b.shape

    def backward(g):
        return unbroadcast(g, sa), unbroadcast(g, sb)

    return graph.record("add", (a, b), a.value + b.value, backward)


def sub(a: Operand, b: Operand) -> Tensor:
    graph = _graph_of(a, b)
    a, b = _lift(graph, a), _lift(graph, b)
    sa, sb = a.shape, b.shape

    def backward(g):
        return unbroadcast(g, sa), unbroadcast(-g, sb)

    return graph.record("sub", (a, b), a.value - b.value, backward)


def mul(a: Operand, b: Operand) -> Tensor:
    graph = _graph_of(a, b)
    a, b = _lift(graph, a), _lift(graph, b)
    va, vb = a.value, b.value

    def backward(g):
        return unbroadcast(g * vb, va.shape), unbroadcast(g * va, vb.shape)

    return graph.record("mul", (a, b), va * vb, backward)


def div(a: Operand, b: Operand) -> Tensor:
    graph = _graph_of(a, b)
    a, b = _lift(graph, a), _lift(graph, b)
    va, vb = a.value, b.value
    out = va / vb

    def backward(g):
        return unbroadcast(g / vb, va.shape), unbroadcast(-g * out / vb, vb.shape)

    return graph.record("div", (a, b), out, backward)


def neg(a: Tensor) -> Tensor:
    return a.graph.record("neg", (a,), -a.value, lambda g: (-g,))


def matmul(a: Operand, b: Operand) -> Tensor:
    """Batched matrix product over the last two axes, broadcasting leading axes."""
    graph = _graph_of(a, b)
    a, b = _lift(graph, a), _lift(graph, b)
    va, vb = a.value, b.value
    if va.ndim < 2 or vb.ndim < 2:
        raise ConfigurationError(
            f"matmul needs operands of rank >= 2, got {va.shape} and {vb.shape}"
        )
    if va.shape[-1] != vb.shape[-2]:
        raise ConfigurationError(f"matmul shape mismatch: {va.shape} @ {vb.shape}")

    def backward(g):
        ga = np.matmul(g, np.swapaxes(vb, -1, -2))
        gb = np.matmul(np.swapaxes(va, -1, -2), g)
        return unbroadcast(ga, va.shape), unbroadcast(gb, vb.shape)

    return graph.record("matmul", (a, b), np.matmul(va, vb), backward)


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return x.graph.record(
        "transpose",
        (x,),
        np.transpose(x.value, axes),
        lambda g: (np.transpose(g, inverse),),
    )


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    original = x.shape
    return x.graph.record(
        "reshape",
        (x,),
        np.reshape(x.value, tuple(shape)),
        lambda g: (np.reshape(g, original),),
    )


def _expand_reduced(g: np.ndarray, shape, axis: Axis, keepdims: bool) -> np.ndarray:
    if axis is not None and not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def sum(x: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:
    shape = x.shape
    return x.graph.record(
        "sum",
        (x,),
        np.sum(x.value, axis=axis, keepdims=keepdims),
        lambda g: (_expand_reduced(g, shape, axis, keepdims),),
    )


def mean(x: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:
    shape = x.shape
    value = np.mean(x.value, axis=axis, keepdims=keepdims)
    count = x.value.size // max(np.size(value), 1)

    return x.graph.record(
        "mean",
        (x,),
        value,
        lambda g: (_expand_reduced(g, shape, axis, keepdims) / count,),
    )


def relu(x: Tensor) -> Tensor:
    mask = x.value > 0
    return x.graph.record(
        "relu", (x,), np.where(mask, x.value, 0.0), lambda g: (g * mask,)
    )


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.value - np.max(x.value, axis=axis, keepdims=True)
    exps = np.exp(shifted)
    out = exps / np.sum(exps, axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)

    return x.graph.record("softmax", (x,), out, backward)


def layer_norm(x: Tensor, gain: Operand, shift: Operand, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale by `gain` and add `shift`."""
    if eps <= 0:
        raise ConfigurationError(f"layer_norm eps must be positive, got {eps}")
    graph = x.graph
    gain, shift = _lift(graph, gain), _lift(graph, shift)
    vx, vg = x.value, gain.value
    mu = np.mean(vx, axis=-1, keepdims=True)
    centered = vx - mu
    inv_std = 1.0 / np.sqrt(np.mean(centered**2, axis=-1, keepdims=True) + eps)
    normed = centered * inv_std

    def backward(g):
        g_normed = g * vg
        gx = inv_std * (
            g_normed
            - np.mean(g_normed, axis=-1, keepdims=True)
            - normed * np.mean(g_normed * normed, axis=-1, keepdims=True)
        )
        return (
            gx,
            unbroadcast(g * normed, vg.shape),
            unbroadcast(g, shift.shape),
        )

    return graph.record(
        "layer_norm", (x, gain, shift), normed * vg + shift.value, backward
    )


def l2_norm(x: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:
    """Euclidean norm. The gradient at a zero vector is the zero vector."""
    if x.value.size == 0:
        raise InputError("l2_norm of an empty tensor")
    vx = x.value
    norm_kept = np.sqrt(np.sum(vx * vx, axis=axis, keepdims=True))
    value = norm_kept if keepdims else np.sum(norm_kept, axis=axis)
    safe = np.where(norm_kept > 0, norm_kept, 1.0)
    direction = np.where(norm_kept > 0, vx / safe, 0.0)

    def backward(g):
        if axis is None and not keepdims:
            return (g * direction,)
        g_kept = g if keepdims else np.expand_dims(g, axis)
        return (g_kept * direction,)

    return x.graph.record("l2_norm", (x,), value, backward)


def cross_entropy(logits: Tensor, labels: Sequence[int]) -> Tensor:
    """Mean negative log-softmax probability of the true class over rows."""
    vx = logits.value
    if vx.ndim != 2:
        raise ConfigurationError(f"cross_entropy expects N x K logits, got {vx.shape}")
    n, k = vx.shape
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.shape[0] != n:
        raise InputError(f"got {labels.shape[0]} labels for {n} rows of logits")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise InputError(f"labels must lie in [0, {k}), got {labels.tolist()}")

    shifted = vx - np.max(vx, axis=1, keepdims=True)
    log_z = np.log(np.sum(np.exp(shifted), axis=1, keepdims=True))
    log_probs = shifted - log_z
    rows = np.arange(n)
    loss = -np.mean(log_probs[rows, labels])

    def backward(g):
        grad = np.exp(log_probs)
        grad[rows, labels] -= 1.0
        return (g * grad / n,)

    return logits.graph.record("cross_entropy", (logits,), loss, backward)
