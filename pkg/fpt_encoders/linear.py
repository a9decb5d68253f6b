"""f(X) = A @ flatten(X). Drift under an additive probe is A @ delta whatever X is,
which makes this encoder the analytic oracle for the drift-based formulas and the
negative control for drift-based detection."""

from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from fpt_autodiff import Graph, Tensor, ops
from fpt_utils.errors import ConfigurationError
from fpt_utils.seeding import make_rng


@dataclass
class LinearEncoderParams:
    image_shape: Tuple[int, int, int]
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.image_shape = tuple(int(v) for v in self.image_shape)
        self.matrix = np.array(self.matrix, dtype=np.float64)
        pixels = int(np.prod(self.image_shape))
        if self.matrix.ndim != 2 or self.matrix.shape[1] != pixels:
            raise ConfigurationError(
                f"linear encoder matrix must be F x {pixels}, got {self.matrix.shape}"
            )
        if not np.all(np.isfinite(self.matrix)):
            raise ConfigurationError("linear encoder matrix has non-finite entries")

    @property
    def feature_dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def identity(cls, image_shape: Tuple[int, int, int]) -> "LinearEncoderParams":
        return cls(image_shape, np.eye(int(np.prod(image_shape))))

    @classmethod
    def random(
        cls, image_shape: Tuple[int, int, int], feature_dim: int, seed: int = 0
    ) -> "LinearEncoderParams":
        pixels = int(np.prod(image_shape))
        matrix = make_rng(seed).normal(0.0, 1.0 / np.sqrt(pixels), size=(feature_dim, pixels))
        return cls(image_shape, matrix)

    def bind(self, graph: Graph, requires_grad: bool = False) -> Dict[str, Tensor]:
        return {"linear.A": graph.leaf(self.matrix, requires_grad=requires_grad, name="linear.A")}

    def forward(
        self,
        graph: Graph,
        images: Tensor,
        leaves: Optional[Mapping[str, Tensor]] = None,
    ) -> Tensor:
        w = leaves if leaves is not None else self.bind(graph)
        flat = ops.reshape(images, (images.shape[0], int(np.prod(self.image_shape))))
        return ops.matmul(flat, ops.transpose(w["linear.A"], (1, 0)))

    @property
    def tensors(self) -> Dict[str, np.ndarray]:
        return {"linear.A": self.matrix}

    def with_tensors(self, tensors: Mapping[str, np.ndarray]) -> "LinearEncoderParams":
        return LinearEncoderParams(self.image_shape, tensors["linear.A"])

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {
            "linear.shape": np.array(self.image_shape, dtype=np.float64),
            "linear.A": self.matrix,
        }

    @classmethod
    def from_state_dict(cls, state: Mapping[str, np.ndarray]) -> "LinearEncoderParams":
        shape = tuple(int(v) for v in np.asarray(state["linear.shape"]).reshape(-1))
        return cls(shape, state["linear.A"])
