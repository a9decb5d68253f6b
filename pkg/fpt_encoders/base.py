from typing import Mapping, Optional, Protocol, Tuple

import numpy as np

from fpt_autodiff import Graph, Tensor
from fpt_utils.errors import InputError


class FeatureEncoder(Protocol):
    """Anything that maps a batch of images [N, C, H, W] to features [N, F] on a graph.

    `leaves` lets training bind the parameters as gradient-tracking leaves; when it is
    None the encoder binds them as constants.
    """

    image_shape: Tuple[int, int, int]
    feature_dim: int

    def forward(
        self,
        graph: Graph,
        images: Tensor,
        leaves: Optional[Mapping[str, Tensor]] = None,
    ) -> Tensor: ...

    def state_dict(self) -> "dict[str, np.ndarray]": ...


def check_images(encoder: FeatureEncoder, images: np.ndarray) -> np.ndarray:
    """Validate a batch against the encoder's configured C, H, W and the [0, 1] range.

    Raises:
        InputError: on shape or range violations.
    """
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 4 or tuple(images.shape[1:]) != tuple(encoder.image_shape):
        raise InputError(
            f"expected images of shape [N, {', '.join(map(str, encoder.image_shape))}],"
            f" got {list(images.shape)}"
        )
    if images.size and (images.min() < 0.0 or images.max() > 1.0):
        raise InputError(
            f"pixels must lie in [0, 1], got range [{images.min()}, {images.max()}]"
        )
    return images


def check_image(encoder: FeatureEncoder, image: np.ndarray) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    if tuple(image.shape) != tuple(encoder.image_shape):
        raise InputError(
            f"expected an image of shape {list(encoder.image_shape)},"
            f" got {list(image.shape)}"
        )
    return check_images(encoder, image[None])[0]


def encode_batch(encoder: FeatureEncoder, images: np.ndarray) -> np.ndarray:
    images = check_images(encoder, images)
    graph = Graph()
    return encoder.forward(graph, graph.leaf(images)).numpy()


def encode(encoder: FeatureEncoder, image: np.ndarray) -> np.ndarray:
    """f(X): the F-dim feature of one C x H x W image."""
    image = check_image(encoder, image)
    return encode_batch(encoder, image[None])[0]


def feature_norm(feature: np.ndarray) -> float:
    return float(np.linalg.norm(feature))
