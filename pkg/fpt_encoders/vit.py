"""Desk-scale vision transformer used in place of a pretrained CLIP image tower.

patchify (P x P patches, flattened) -> linear embed + position embedding
-> [pre-norm attention block + pre-norm 2-layer MLP, each residual] x blocks
-> layer norm -> mean over tokens -> linear projection to F.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from fpt_autodiff import AttentionWeights, Graph, Tensor, ops
from fpt_autodiff.functional import layer_norm, linear, multi_head_attention, relu
from fpt_utils.errors import ConfigurationError
from fpt_utils.seeding import MASK64, make_rng

logger = logging.getLogger(__name__)

ATTENTION_PARTS = ("q", "k", "v", "out")


@dataclass
class EncoderParams:
    image_shape: Tuple[int, int, int]
    patch_size: int
    embed_dim: int
    num_heads: int
    num_blocks: int
    feature_dim: int
    mlp_dim: int
    seed: int
    tensors: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.image_shape = tuple(int(v) for v in self.image_shape)
        channels, height, width = self.image_shape
        if self.patch_size < 1 or height % self.patch_size or width % self.patch_size:
            raise ConfigurationError(
                f"image {height}x{width} is not divisible into {self.patch_size}-pixel"
                " patches"
            )
        if self.num_heads < 1 or self.embed_dim % self.num_heads:
            raise ConfigurationError(
                f"embed dim {self.embed_dim} is not divisible by {self.num_heads} heads"
            )
        if self.num_blocks < 1 or self.feature_dim < 1 or self.mlp_dim < 1:
            raise ConfigurationError("blocks, feature dim and mlp dim must be positive")

    @property
    def grid(self) -> Tuple[int, int]:
        _, height, width = self.image_shape
        return height // self.patch_size, width // self.patch_size

    @property
    def num_tokens(self) -> int:
        rows, cols = self.grid
        return rows * cols

    @property
    def patch_dim(self) -> int:
        return self.image_shape[0] * self.patch_size**2

    def tensor_shapes(self) -> Dict[str, Tuple[int, ...]]:
        d, f, m = self.embed_dim, self.feature_dim, self.mlp_dim
        shapes: Dict[str, Tuple[int, ...]] = {
            "patch_embed.weight": (self.patch_dim, d),
            "patch_embed.bias": (d,),
            "pos_embed": (self.num_tokens, d),
        }
        for i in range(self.num_blocks):
            prefix = f"blocks.{i}"
            shapes[f"{prefix}.norm1.gain"] = (d,)
            shapes[f"{prefix}.norm1.shift"] = (d,)
            for part in ATTENTION_PARTS:
                shapes[f"{prefix}.attn.{part}_weight"] = (d, d)
                shapes[f"{prefix}.attn.{part}_bias"] = (d,)
            shapes[f"{prefix}.norm2.gain"] = (d,)
            shapes[f"{prefix}.norm2.shift"] = (d,)
            shapes[f"{prefix}.mlp.fc1.weight"] = (d, m)
            shapes[f"{prefix}.mlp.fc1.bias"] = (m,)
            shapes[f"{prefix}.mlp.fc2.weight"] = (m, d)
            shapes[f"{prefix}.mlp.fc2.bias"] = (d,)
        shapes["norm.gain"] = (d,)
        shapes["norm.shift"] = (d,)
        shapes["head.weight"] = (d, f)
        shapes["head.bias"] = (f,)
        return shapes

    def check_tensors(self) -> None:
        for name, shape in self.tensor_shapes().items():
            if name not in self.tensors:
                raise ConfigurationError(f"encoder tensor '{name}' is missing")
            if tuple(self.tensors[name].shape) != shape:
                raise ConfigurationError(
                    f"encoder tensor '{name}' has shape {self.tensors[name].shape},"
                    f" expected {shape}"
                )

    def with_tensors(self, tensors: Mapping[str, np.ndarray]) -> "EncoderParams":
        params = EncoderParams(
            self.image_shape,
            self.patch_size,
            self.embed_dim,
            self.num_heads,
            self.num_blocks,
            self.feature_dim,
            self.mlp_dim,
            self.seed,
            {name: np.array(value, dtype=np.float64) for name, value in tensors.items()},
        )
        params.check_tensors()
        return params

    def bind(self, graph: Graph, requires_grad: bool = False) -> Dict[str, Tensor]:
        return {
            name: graph.leaf(value, requires_grad=requires_grad, name=name)
            for name, value in self.tensors.items()
        }

    def patchify(self, images: Tensor) -> Tensor:
        n = images.shape[0]
        c, _, _ = self.image_shape
        rows, cols = self.grid
        p = self.patch_size
        x = ops.reshape(images, (n, c, rows, p, cols, p))
        x = ops.transpose(x, (0, 2, 4, 1, 3, 5))
        return ops.reshape(x, (n, rows * cols, c * p * p))

    def forward(
        self,
        graph: Graph,
        images: Tensor,
        leaves: Optional[Mapping[str, Tensor]] = None,
    ) -> Tensor:
        w = leaves if leaves is not None else self.bind(graph)
        x = linear(self.patchify(images), w["patch_embed.weight"], w["patch_embed.bias"])
        x = ops.add(x, w["pos_embed"])
        for i in range(self.num_blocks):
            prefix = f"blocks.{i}"
            h = layer_norm(x, w[f"{prefix}.norm1.gain"], w[f"{prefix}.norm1.shift"])
            attention = AttentionWeights(
                *(
                    w[f"{prefix}.attn.{part}_{kind}"]
                    for part in ATTENTION_PARTS
                    for kind in ("weight", "bias")
                )
            )
            x = ops.add(x, multi_head_attention(h, attention, self.num_heads))
            h = layer_norm(x, w[f"{prefix}.norm2.gain"], w[f"{prefix}.norm2.shift"])
            h = relu(linear(h, w[f"{prefix}.mlp.fc1.weight"], w[f"{prefix}.mlp.fc1.bias"]))
            x = ops.add(x, linear(h, w[f"{prefix}.mlp.fc2.weight"], w[f"{prefix}.mlp.fc2.bias"]))
        x = layer_norm(x, w["norm.gain"], w["norm.shift"])
        pooled = ops.mean(x, axis=1)
        return linear(pooled, w["head.weight"], w["head.bias"])

    def meta_vector(self) -> np.ndarray:
        """Hyperparameters as float64; the 64-bit seed is split into two 32-bit halves
        so that every entry is exactly representable."""
        c, h, w = self.image_shape
        seed = int(self.seed) & MASK64
        return np.array(
            [
                c,
                h,
                w,
                self.patch_size,
                self.embed_dim,
                self.num_heads,
                self.num_blocks,
                self.feature_dim,
                self.mlp_dim,
                seed >> 32,
                seed & 0xFFFFFFFF,
            ],
            dtype=np.float64,
        )

    def state_dict(self) -> Dict[str, np.ndarray]:
        state = {"meta": self.meta_vector()}
        state.update(self.tensors)
        return state

    @classmethod
    def from_state_dict(cls, state: Mapping[str, np.ndarray]) -> "EncoderParams":
        meta: List[int] = [int(v) for v in np.asarray(state["meta"]).reshape(-1)]
        if len(meta) != 11:
            raise ConfigurationError(f"encoder meta has {len(meta)} entries, expected 11")
        c, h, w, patch, embed, heads, blocks, feature, mlp, seed_high, seed_low = meta
        seed = (seed_high << 32) | seed_low
        shell = cls((c, h, w), patch, embed, heads, blocks, feature, mlp, seed)
        return shell.with_tensors({k: v for k, v in state.items() if k != "meta"})


def init_encoder(
    image_shape: Tuple[int, int, int],
    patch_size: int = 4,
    embed_dim: int = 64,
    num_heads: int = 4,
    num_blocks: int = 2,
    feature_dim: int = 64,
    mlp_dim: Optional[int] = None,
    seed: int = 0,
) -> EncoderParams:
    """Seeded initialization: weights ~ N(0, 1/fan_in), zero biases, unit norm gains."""
    shell = EncoderParams(
        image_shape,
        patch_size,
        embed_dim,
        num_heads,
        num_blocks,
        feature_dim,
        mlp_dim if mlp_dim is not None else 2 * embed_dim,
        seed,
    )
    rng = make_rng(seed)
    tensors: Dict[str, np.ndarray] = {}
    for name, shape in shell.tensor_shapes().items():
        if name.endswith(".gain"):
            tensors[name] = np.ones(shape)
        elif name.endswith(".shift") or name.endswith("bias"):
            tensors[name] = np.zeros(shape)
        elif name == "pos_embed":
            tensors[name] = rng.normal(0.0, 0.02, size=shape)
        else:
            tensors[name] = rng.normal(0.0, 1.0 / np.sqrt(shape[0]), size=shape)
    logger.debug(
        f"Initialized encoder: {shell.num_tokens} tokens, dim {embed_dim},"
        f" {num_blocks} blocks, feature dim {feature_dim}"
    )
    return shell.with_tensors(tensors)
