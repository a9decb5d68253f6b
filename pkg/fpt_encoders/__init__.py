from .base import FeatureEncoder, check_image, check_images, encode, encode_batch, feature_norm
from .classifier import PrototypeClassifier, classify, classify_batch, cosine_logits, predict
from .linear import LinearEncoderParams
from .training import TrainConfig, TrainResult, accuracy, train_encoder
from .vit import EncoderParams, init_encoder
from .weights_io import load_weights, read_tensor_file, save_weights, write_tensor_file

__all__ = [
    "EncoderParams",
    "FeatureEncoder",
    "LinearEncoderParams",
    "PrototypeClassifier",
    "TrainConfig",
    "TrainResult",
    "accuracy",
    "check_image",
    "check_images",
    "classify",
    "classify_batch",
    "cosine_logits",
    "encode",
    "encode_batch",
    "feature_norm",
    "init_encoder",
    "load_weights",
    "predict",
    "read_tensor_file",
    "save_weights",
    "train_encoder",
    "write_tensor_file",
]
