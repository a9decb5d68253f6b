import numpy as np
import pytest

from fpt_encoders import (
    LinearEncoderParams,
    PrototypeClassifier,
    TrainConfig,
    accuracy,
    check_image,
    classify,
    encode,
    encode_batch,
    feature_norm,
    init_encoder,
    predict,
    train_encoder,
)
from fpt_encoders.transforms import center_crop_rescale, get_transform, hflip
from fpt_harness import SyntheticDatasetSpec, generate_synthetic
from fpt_utils.constants import Tte
from fpt_utils.errors import ConfigurationError, InputError
from fpt_utils.seeding import make_rng


class TestVitEncoder:
    def test_feature_shape(self, tiny_encoder, tiny_images):
        assert encode_batch(tiny_encoder, tiny_images).shape == (4, 8)
        assert encode(tiny_encoder, tiny_images[0]).shape == (8,)

    def test_same_seed_same_weights(self):
        a = init_encoder((1, 8, 8), 4, 8, 2, 1, 8, seed=11)
        b = init_encoder((1, 8, 8), 4, 8, 2, 1, 8, seed=11)
        for name, value in a.tensors.items():
            np.testing.assert_array_equal(value, b.tensors[name])

    def test_batch_matches_single(self, tiny_encoder, tiny_images):
        batch = encode_batch(tiny_encoder, tiny_images)
        for i, image in enumerate(tiny_images):
            np.testing.assert_allclose(encode(tiny_encoder, image), batch[i], atol=1e-12)

    def test_patch_size_must_divide(self):
        with pytest.raises(ConfigurationError):
            init_encoder((1, 8, 8), patch_size=3, embed_dim=8, num_heads=2, num_blocks=1, feature_dim=8)

    def test_heads_must_divide(self):
        with pytest.raises(ConfigurationError):
            init_encoder((1, 8, 8), patch_size=4, embed_dim=8, num_heads=3, num_blocks=1, feature_dim=8)

    def test_image_checks(self, tiny_encoder):
        with pytest.raises(InputError):
            check_image(tiny_encoder, np.zeros((1, 4, 4)))
        with pytest.raises(InputError):
            check_image(tiny_encoder, np.full((1, 8, 8), 1.5))


class TestLinearEncoder:
    def test_identity_is_flatten(self, identity_encoder):
        image = make_rng(0).uniform(size=(1, 16, 16))
        np.testing.assert_array_equal(encode(identity_encoder, image), image.reshape(-1))

    def test_drift_does_not_depend_on_image(self):
        enc = LinearEncoderParams.random((1, 8, 8), 6, seed=2)
        rng = make_rng(3)
        delta = rng.uniform(-0.05, 0.05, size=(1, 8, 8))
        a, b = rng.uniform(0.2, 0.8, size=(2, 1, 8, 8))
        drift_a = encode(enc, a + delta) - encode(enc, a)
        drift_b = encode(enc, b + delta) - encode(enc, b)
        np.testing.assert_allclose(drift_a, drift_b, atol=1e-12)

    def test_matrix_shape_checked(self):
        with pytest.raises(ConfigurationError):
            LinearEncoderParams((1, 4, 4), np.ones((3, 15)))


class TestPrototypeClassifier:
    def test_prototypes_are_unit_norm(self, tiny_clf):
        np.testing.assert_allclose(np.linalg.norm(tiny_clf.prototypes, axis=1), 1.0)

    def test_non_unit_prototypes_rejected(self):
        with pytest.raises(ConfigurationError):
            PrototypeClassifier(np.ones((2, 3)))

    def test_logits_are_scaled_cosines(self):
        clf = PrototypeClassifier(np.eye(3), temperature=20.0)
        np.testing.assert_allclose(classify(clf, np.array([0.0, 3.0, 4.0])), [0.0, 12.0, 16.0])

    def test_scale_invariant(self, tiny_clf):
        feature = make_rng(4).normal(size=8)
        np.testing.assert_allclose(classify(tiny_clf, feature), classify(tiny_clf, 7.5 * feature))

    def test_zero_feature_rejected(self, tiny_clf):
        with pytest.raises(InputError):
            classify(tiny_clf, np.zeros(8))

    def test_predict_is_argmax(self):
        clf = PrototypeClassifier(np.eye(2))
        np.testing.assert_array_equal(predict(clf, np.array([[1.0, 0.1], [0.2, 2.0]])), [0, 1])


class TestTransforms:
    def test_hflip_is_involution(self, tiny_images):
        np.testing.assert_array_equal(hflip(hflip(tiny_images[0])), tiny_images[0])

    def test_center_crop_keeps_shape_and_range(self, tiny_images):
        out = center_crop_rescale(tiny_images[0], 0.875)
        assert out.shape == tiny_images[0].shape
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_crop_of_constant_image_is_constant(self):
        image = np.full((3, 32, 32), 0.4)
        np.testing.assert_allclose(center_crop_rescale(image), image)

    def test_unknown_transform(self):
        with pytest.raises(ConfigurationError):
            get_transform("rotate")

    def test_default_set_has_four_members(self):
        assert len(Tte.DEFAULT) == 4
        for name in Tte.DEFAULT:
            assert callable(get_transform(name))


class TestTraining:
    def test_training_lowers_loss_and_keeps_input(self, tiny_encoder, tiny_clf, tiny_dataset):
        before = {k: np.array(v) for k, v in tiny_encoder.tensors.items()}
        result = train_encoder(
            tiny_encoder, tiny_clf, tiny_dataset, TrainConfig(epochs=6, batch_size=6, seed=1, augment=False)
        )
        for name, value in before.items():
            np.testing.assert_array_equal(tiny_encoder.tensors[name], value)
        assert min(result.losses[3:]) < result.losses[0]
        assert 0.0 <= result.train_accuracy <= 1.0

    def test_zero_learning_rate_is_no_op(self, tiny_encoder, tiny_clf, tiny_dataset):
        result = train_encoder(
            tiny_encoder, tiny_clf, tiny_dataset, TrainConfig(epochs=1, learning_rate=0.0)
        )
        for name, value in tiny_encoder.tensors.items():
            np.testing.assert_array_equal(result.params.tensors[name], value)

    def test_training_is_deterministic(self, tiny_encoder, tiny_clf, tiny_dataset):
        cfg = TrainConfig(epochs=1, batch_size=4, seed=9)
        a = train_encoder(tiny_encoder, tiny_clf, tiny_dataset, cfg)
        b = train_encoder(tiny_encoder, tiny_clf, tiny_dataset, cfg)
        assert a.losses == b.losses

    def test_labels_out_of_range(self, tiny_encoder, tiny_dataset):
        clf = PrototypeClassifier.from_seed(2, 8)
        with pytest.raises(InputError):
            train_encoder(tiny_encoder, clf, tiny_dataset, TrainConfig(epochs=1))

    def test_negative_learning_rate_rejected(self):
        with pytest.raises(ConfigurationError):
            TrainConfig(learning_rate=-0.1)

    def test_accuracy_of_empty_set(self, tiny_encoder, tiny_clf):
        assert accuracy(tiny_encoder, tiny_clf, np.zeros((0, 1, 8, 8)), []) == 0.0


@pytest.fixture
def two_blob_run():
    """The tiny encoder after three epochs on two well separated synthetic classes."""
    spec = SyntheticDatasetSpec(classes=2, per_class=24, image_shape=(1, 8, 8), seed=11, jitter=0.01, contrast=0.4)
    data = generate_synthetic(spec, "train")
    clf = PrototypeClassifier.from_seed(2, 8, seed=7)
    enc = init_encoder((1, 8, 8), 4, 8, 2, 1, 8, seed=0)
    result = train_encoder(enc, clf, data, TrainConfig(epochs=3, batch_size=4, seed=2, augment=False))
    return result, data


class TestTrainedEncoder:
    def test_two_blobs_in_three_epochs(self, two_blob_run):
        result, _ = two_blob_run
        assert result.train_accuracy >= 0.95

    def test_one_pixel_change_barely_moves_the_feature(self, two_blob_run):
        result, data = two_blob_run
        for image in data.images[::8]:
            base = feature_norm(encode(result.params, image))
            for pixel in [(0, 0, 0), (0, 3, 4), (0, 7, 7)]:
                nudged = np.array(image)
                nudged[pixel] += 1e-6
                assert abs(feature_norm(encode(result.params, nudged)) - base) < 1e-2

    def test_feature_norm(self):
        assert feature_norm(np.array([3.0, 4.0])) == 5.0
