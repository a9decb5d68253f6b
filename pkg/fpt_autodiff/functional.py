"""Layers built from the primitives in `ops`."""

import math
from typing import NamedTuple

from fpt_utils.errors import ConfigurationError

from . import ops
from .graph import Tensor
from .ops import Operand


class AttentionWeights(NamedTuple):
    q_weight: Operand
    q_bias: Operand
    k_weight: Operand
    k_bias: Operand
    v_weight: Operand
    v_bias: Operand
    out_weight: Operand
    out_bias: Operand


def linear(x: Tensor, weight: Operand, bias: Operand) -> Tensor:
    """y = x @ weight + bias over the last axis of `x`.

    Raises:
        ConfigurationError: if the shapes do not conform.
    """
    graph = x.graph
    weight = ops._lift(graph, weight)
    bias = ops._lift(graph, bias)
    if weight.ndim != 2 or x.shape[-1] != weight.shape[0]:
        raise ConfigurationError(
            f"linear: input {x.shape} does not conform to weight {weight.shape}"
        )
    if bias.shape != (weight.shape[1],):
        raise ConfigurationError(
            f"linear: bias {bias.shape} does not match output width {weight.shape[1]}"
        )
    if x.ndim == 1:
        row = ops.reshape(x, (1, x.shape[0]))
        return ops.reshape(ops.add(ops.matmul(row, weight), bias), (weight.shape[1],))
    return ops.add(ops.matmul(x, weight), bias)


def multi_head_attention(
    tokens: Tensor, weights: AttentionWeights, heads: int
) -> Tensor:
    """Scaled dot-product self-attention over tokens of shape [..., T, D].

    Raises:
        ConfigurationError: if D is not divisible by `heads`.
    """
    if tokens.ndim < 2:
        raise ConfigurationError(f"attention expects [..., T, D] tokens, got {tokens.shape}")
    *lead, num_tokens, width = tokens.shape
    lead = tuple(lead)
    if heads < 1 or width % heads != 0:
        raise ConfigurationError(f"embed dim {width} is not divisible by {heads} heads")
    head_dim = width // heads
    n = len(lead)
    # [..., T, H, dh] <-> [..., H, T, dh]
    swap_head_token = tuple(range(n)) + (n + 1, n, n + 2)

    def split_heads(x: Tensor) -> Tensor:
        x = ops.reshape(x, lead + (num_tokens, heads, head_dim))
        return ops.transpose(x, swap_head_token)

    q = split_heads(linear(tokens, weights.q_weight, weights.q_bias))
    k = split_heads(linear(tokens, weights.k_weight, weights.k_bias))
    v = split_heads(linear(tokens, weights.v_weight, weights.v_bias))

    k_t = ops.transpose(k, tuple(range(n + 1)) + (n + 2, n + 1))
    scores = ops.mul(ops.matmul(q, k_t), 1.0 / math.sqrt(head_dim))
    attn = ops.softmax(scores, axis=-1)
    context = ops.transpose(ops.matmul(attn, v), swap_head_token)
    context = ops.reshape(context, lead + (num_tokens, width))
    return linear(context, weights.out_weight, weights.out_bias)


# Re-exported so callers can treat this module as the layer namespace
relu = ops.relu
softmax = ops.softmax
layer_norm = ops.layer_norm
l2_norm = ops.l2_norm
cross_entropy = ops.cross_entropy
