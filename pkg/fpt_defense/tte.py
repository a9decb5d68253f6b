import numpy as np

from fpt_encoders import FeatureEncoder, PrototypeClassifier, classify, encode
from fpt_encoders.transforms import get_transform

from .config import DefenseConfig


def tte_predict(
    encoder: FeatureEncoder,
    clf: PrototypeClassifier,
    image: np.ndarray,
    cfg: DefenseConfig,
) -> np.ndarray:
    """Arithmetic mean of the cosine logits over the configured transforms.

    With tte_enabled=false this is classify(encode(image)).
    """
    if not cfg.tte_enabled:
        return classify(clf, encode(encoder, image))
    logits = [
        classify(clf, encode(encoder, get_transform(name, cfg.tte_crop_fraction)(image)))
        for name in cfg.tte_transforms
    ]
    return np.mean(np.stack(logits), axis=0)
