"""Dynamic feature modulator: maps a feature vector to a per-image noise scale.

The feature is split into T tokens, passed through layer norm and one multi-head
self-attention layer (residual), and the post-attention token L2 norms are turned
into a distribution with a softmax. Its entropy divided by ln T is the dispersion
h in [0, 1]; sigma = sigma_min + (sigma_max - sigma_min) * h. Weights are a fixed,
seeded, scaled orthogonal initialization and are never trained.
"""

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from fpt_autodiff import AttentionWeights, Graph
from fpt_autodiff.functional import layer_norm, multi_head_attention
from fpt_utils.errors import ConfigurationError
from fpt_utils.seeding import make_rng

from .config import DefenseConfig

ATTENTION_PARTS = ("q", "k", "v", "out")


@dataclass
class DfmParams:
    feature_dim: int
    num_tokens: int
    num_heads: int
    seed: int
    # softmax sharpness over token norms
    sharpness: float = 1.0
    tensors: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.num_tokens < 1 or self.feature_dim % self.num_tokens:
            raise ConfigurationError(
                f"feature dim {self.feature_dim} is not divisible into"
                f" {self.num_tokens} tokens"
            )
        if self.token_dim % self.num_heads:
            raise ConfigurationError(
                f"DFM token dim {self.token_dim} is not divisible by {self.num_heads} heads"
            )
        if not self.sharpness > 0:
            raise ConfigurationError(f"sharpness must be positive, got {self.sharpness}")

    @property
    def token_dim(self) -> int:
        return self.feature_dim // self.num_tokens


def _scaled_orthogonal(rng: np.random.Generator, size: int, gain: float) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(size, size)))
    # fix column signs so the draw is a deterministic function of the stream
    return gain * q * np.sign(np.diag(r))


def init_dfm(
    feature_dim: int,
    num_tokens: int = 8,
    num_heads: int = 2,
    seed: int = 0,
    sharpness: float = 1.0,
) -> DfmParams:
    params = DfmParams(feature_dim, num_tokens, num_heads, seed, sharpness)
    rng = make_rng(seed)
    d = params.token_dim
    tensors = {"norm.gain": np.ones(d), "norm.shift": np.zeros(d)}
    for part in ATTENTION_PARTS:
        tensors[f"attn.{part}_weight"] = _scaled_orthogonal(rng, d, 1.0)
        tensors[f"attn.{part}_bias"] = np.zeros(d)
    params.tensors = tensors
    return params


def dfm_from_config(feature_dim: int, cfg: DefenseConfig) -> DfmParams:
    return init_dfm(feature_dim, cfg.dfm_tokens, cfg.dfm_heads, cfg.seed)


def dfm_dispersion(feature: np.ndarray, dfm: DfmParams) -> float:
    """The normalized entropy h in [0, 1] of the softmax over token norms."""
    feature = np.asarray(feature, dtype=np.float64).reshape(-1)
    if feature.shape[0] != dfm.feature_dim:
        raise ConfigurationError(
            f"feature dim {feature.shape[0]} does not match DFM dim {dfm.feature_dim}"
        )
    if dfm.num_tokens == 1:
        return 0.0

    graph = Graph()
    w = {name: graph.constant(value) for name, value in dfm.tensors.items()}
    tokens = graph.constant(feature.reshape(dfm.num_tokens, dfm.token_dim))
    normed = layer_norm(tokens, w["norm.gain"], w["norm.shift"])
    attention = AttentionWeights(
        *(w[f"attn.{part}_{kind}"] for part in ATTENTION_PARTS for kind in ("weight", "bias"))
    )
    mixed = tokens.value + multi_head_attention(normed, attention, dfm.num_heads).value

    norms = dfm.sharpness * np.linalg.norm(mixed, axis=1)
    weights = np.exp(norms - norms.max())
    probs = weights / weights.sum()
    nonzero = probs[probs > 0]
    entropy = float(-np.sum(nonzero * np.log(nonzero)))
    return float(np.clip(entropy / np.log(dfm.num_tokens), 0.0, 1.0))


def sigma_from_dispersion(h: float, cfg: DefenseConfig) -> float:
    return cfg.sigma_min + (cfg.sigma_max - cfg.sigma_min) * h


def dfm_sigma(feature: np.ndarray, dfm: DfmParams, cfg: DefenseConfig) -> float:
    """sigma = M(f(X))."""
    return sigma_from_dispersion(dfm_dispersion(feature, dfm), cfg)
