import numpy as np
import pytest

from fpt_defense import DefenseConfig, init_dfm
from fpt_encoders import LinearEncoderParams, PrototypeClassifier, init_encoder
from fpt_harness import Dataset, SyntheticDatasetSpec, generate_synthetic
from fpt_utils.seeding import make_rng

TINY_SHAPE = (1, 8, 8)


@pytest.fixture
def rng():
    return make_rng(1234)


@pytest.fixture
def tiny_encoder():
    """1x8x8 images, four 4x4 patches, D=8, two heads, one block, F=8."""
    return init_encoder(
        TINY_SHAPE, patch_size=4, embed_dim=8, num_heads=2, num_blocks=1, feature_dim=8, seed=0
    )


@pytest.fixture
def tiny_clf():
    return PrototypeClassifier.from_seed(3, 8, seed=7)


@pytest.fixture
def tiny_dfm():
    return init_dfm(8, num_tokens=4, num_heads=2, seed=3)


@pytest.fixture
def tiny_cfg():
    return DefenseConfig(dfm_tokens=4, dfm_heads=2)


@pytest.fixture
def tiny_images(rng):
    return rng.uniform(0.2, 0.8, size=(4,) + TINY_SHAPE)


@pytest.fixture
def identity_encoder():
    """f(X) = flatten(X) on 1x16x16 images."""
    return LinearEncoderParams.identity((1, 16, 16))


@pytest.fixture
def tiny_dataset():
    spec = SyntheticDatasetSpec(
        classes=3, per_class=6, image_shape=TINY_SHAPE, seed=5, jitter=0.01, contrast=0.3
    )
    return generate_synthetic(spec, "train")


@pytest.fixture
def small_run_values(tmp_path):
    """A run small enough for unit tests: 1x8x8 images, 3 classes, 4 eval images each."""
    return {
        "seed": 3,
        "dataset": {
            "classes": 3,
            "train_per_class": 6,
            "eval_per_class": 4,
            "image_shape": [1, 8, 8],
            "jitter": 0.01,
            "contrast": 0.3,
        },
        "encoder": {
            "patch_size": 4,
            "embed_dim": 8,
            "num_heads": 2,
            "num_blocks": 1,
            "feature_dim": 8,
        },
        "train": {"epochs": 1, "batch_size": 6},
        "attack": {"epsilon": "8/255", "steps": 2},
        "defense": {"dfm_tokens": 4, "dfm_heads": 2},
        "output": {"dir": str(tmp_path / "out")},
    }


def make_dataset(images, labels) -> Dataset:
    return Dataset(np.asarray(images), np.asarray(labels))
