import numpy as np
import pytest

from fpt_defense import (
    DefenseConfig,
    adaptive_gain,
    compute_fpt,
    counterattack_objective,
    dfm_dispersion,
    dfm_sigma,
    feature_perception_threshold,
    init_dfm,
    init_noise,
    norm_ratio,
    optimize_counterattack,
    project_delta,
    select_final,
    sigma_from_dispersion,
    suppression_weight,
    ttc_threshold,
    tte_predict,
)
from fpt_encoders import LinearEncoderParams, classify, encode
from fpt_encoders.transforms import hflip
from fpt_utils.constants import Branch, Tte
from fpt_utils.errors import ConfigurationError, DegenerateFeatureError
from fpt_utils.seeding import make_rng

EXACT = 1e-12
SHAPE = (1, 16, 16)


@pytest.fixture
def flat_image():
    """||x|| = 0.625 * 16 = 10 on a 16x16 image."""
    return np.full(SHAPE, 0.625)


class TestFeaturePerceptionThreshold:
    def test_identity_case(self, identity_encoder, flat_image):
        delta_large = np.full(SHAPE, 0.125)  # ||.|| = 2
        delta_small = np.full(SHAPE, 0.03125)  # ||.|| = 0.5
        tau = feature_perception_threshold(identity_encoder, flat_image, delta_small, delta_large)
        assert tau == pytest.approx(0.15, abs=EXACT)

    def test_equal_budgets_with_shared_draw(self, identity_encoder, flat_image):
        cfg = DefenseConfig(probe_eps_small=4 / 255, probe_eps_large=4 / 255)
        assert compute_fpt(identity_encoder, flat_image, cfg, make_rng(0), shared_draw=True) == 0.0

    def test_seeded_draws_repeat(self, tiny_encoder, tiny_images):
        cfg = DefenseConfig()
        a = compute_fpt(tiny_encoder, tiny_images[0], cfg, make_rng(5))
        b = compute_fpt(tiny_encoder, tiny_images[0], cfg, make_rng(5))
        assert a == b

    def test_probe_order_rejected(self):
        with pytest.raises(ConfigurationError):
            DefenseConfig(probe_eps_small=0.2, probe_eps_large=0.1)

    def test_zero_feature(self):
        encoder = LinearEncoderParams(SHAPE, np.zeros((4, 256)))
        with pytest.raises(DegenerateFeatureError):
            compute_fpt(encoder, np.full(SHAPE, 0.5), DefenseConfig(), make_rng(0))


class TestTtcThreshold:
    def test_identity_case(self, identity_encoder, flat_image):
        tau = ttc_threshold(identity_encoder, flat_image, np.full(SHAPE, 0.03125))
        assert tau == pytest.approx(0.05, abs=EXACT)

    def test_zero_probe(self, identity_encoder, flat_image):
        assert ttc_threshold(identity_encoder, flat_image, np.zeros(SHAPE)) == 0.0


class TestAdaptiveGain:
    cfg = DefenseConfig()

    @pytest.mark.parametrize("tau", [-1.0, 0.0, 0.32])
    def test_lower_clamp(self, tau):
        assert adaptive_gain(tau, self.cfg) == 1.0

    def test_upper_clamp_boundary(self):
        assert adaptive_gain(self.cfg.tau_init + np.log(6.0), self.cfg) == pytest.approx(6.0, abs=EXACT)

    def test_beyond_upper_clamp(self):
        assert adaptive_gain(10.0, self.cfg) == 6.0

    def test_interior(self):
        assert adaptive_gain(self.cfg.tau_init + 1.0, self.cfg) == pytest.approx(np.e, abs=EXACT)


class TestSuppressionWeight:
    cfg = DefenseConfig()

    def test_at_threshold(self):
        assert suppression_weight(self.cfg.tau_init, self.cfg) == 1.0

    def test_one_tenth_below(self):
        assert suppression_weight(self.cfg.tau_init - 0.1, self.cfg) == pytest.approx(
            np.exp(-1.0), abs=EXACT
        )


class TestSelectFinal:
    cfg = DefenseConfig()
    delta_c = np.full(SHAPE, 0.01)

    def test_tau_high(self):
        selection = select_final(0.5, 0.9, self.delta_c, self.cfg)
        assert selection.branch == Branch.CounterFull_TauHigh
        np.testing.assert_array_equal(selection.delta, self.delta_c)

    def test_ratio_high(self):
        selection = select_final(0.1, 1.2, self.delta_c, self.cfg)
        assert selection.branch == Branch.CounterFull_RatioHigh
        assert selection.weight == 1.0

    def test_ratio_at_beta_is_suppressed(self):
        assert select_final(0.1, 1.125, self.delta_c, self.cfg).branch == Branch.Suppressed

    def test_tau_at_threshold_is_not_high(self):
        selection = select_final(self.cfg.tau_init, 1.0, self.delta_c, self.cfg)
        assert selection.branch == Branch.Suppressed
        assert selection.weight == 1.0

    def test_suppressed(self):
        selection = select_final(0.1, 1.0, self.delta_c, self.cfg)
        assert selection.branch == Branch.Suppressed
        assert selection.weight == pytest.approx(np.exp(-2.2), abs=EXACT)
        assert selection.weight == pytest.approx(0.1108, abs=1e-4)
        np.testing.assert_allclose(selection.delta, np.exp(-2.2) * self.delta_c, atol=EXACT)


class TestNormRatio:
    def test_zero_delta(self, tiny_encoder, tiny_images):
        assert norm_ratio(tiny_encoder, tiny_images[0], np.zeros((1, 8, 8))) == 1.0

    def test_orthogonal_delta(self, identity_encoder):
        image = np.zeros(SHAPE)
        image[0, :8] = 0.5
        delta = np.zeros(SHAPE)
        delta[0, 8:] = 0.25
        x_norm = np.linalg.norm(image)
        d_norm = np.linalg.norm(delta)
        r = norm_ratio(identity_encoder, image, delta)
        assert r == pytest.approx(np.sqrt(1 + d_norm**2 / x_norm**2), abs=EXACT)
        assert r > 1

    def test_zero_feature(self, identity_encoder):
        with pytest.raises(DegenerateFeatureError):
            norm_ratio(identity_encoder, np.zeros(SHAPE), np.full(SHAPE, 0.1))


class TestDfm:
    def test_dispersion_bounds_and_determinism(self, tiny_dfm, rng):
        for _ in range(20):
            feature = rng.normal(size=8)
            h = dfm_dispersion(feature, tiny_dfm)
            assert 0.0 <= h <= 1.0
            assert dfm_dispersion(feature, tiny_dfm) == h

    def test_sigma_range(self, tiny_dfm, tiny_cfg, rng):
        for _ in range(20):
            sigma = dfm_sigma(rng.normal(size=8), tiny_dfm, tiny_cfg)
            assert tiny_cfg.sigma_min <= sigma <= tiny_cfg.sigma_max

    def test_sigma_endpoints(self, tiny_cfg):
        assert sigma_from_dispersion(0.0, tiny_cfg) == tiny_cfg.sigma_min
        assert sigma_from_dispersion(1.0, tiny_cfg) == pytest.approx(tiny_cfg.sigma_max, abs=EXACT)

    def test_single_token_has_no_dispersion(self):
        assert dfm_dispersion(np.ones(8), init_dfm(8, num_tokens=1, num_heads=1)) == 0.0

    def test_same_seed_same_modulator(self):
        a, b = init_dfm(8, 4, 2, seed=1), init_dfm(8, 4, 2, seed=1)
        for name, value in a.tensors.items():
            np.testing.assert_array_equal(value, b.tensors[name])

    def test_tokens_must_divide_features(self):
        with pytest.raises(ConfigurationError):
            init_dfm(8, num_tokens=3)


class TestCounterNoise:
    def test_init_noise_scale(self):
        noise = init_noise(2.0, 0.05, (100, 100), make_rng(0))
        assert noise.std() == pytest.approx(0.1, rel=0.05)
        assert abs(noise.mean()) < 0.01

    def test_project_delta_budget(self):
        image = make_rng(1).uniform(size=SHAPE)
        delta = project_delta(image, make_rng(2).normal(size=SHAPE), 4 / 255)
        assert np.abs(delta).max() <= 4 / 255
        assert (image + delta).min() >= 0.0 and (image + delta).max() <= 1.0

    def test_identity_encoder_saturates_budget(self, identity_encoder):
        image = np.full(SHAPE, 0.5)
        cfg = DefenseConfig()
        start = 1e-3 * np.sign(make_rng(3).normal(size=SHAPE))
        result = optimize_counterattack(identity_encoder, image, start, cfg)
        np.testing.assert_allclose(np.abs(result.delta), cfg.counter_budget, atol=EXACT)
        assert result.objective == pytest.approx(cfg.counter_budget * 16, abs=1e-10)

    def test_ascent_never_loses_ground(self, tiny_encoder, tiny_images, tiny_cfg):
        for i, image in enumerate(tiny_images):
            start = init_noise(1.0, 0.02, image.shape, make_rng(i))
            result = optimize_counterattack(tiny_encoder, image, start, tiny_cfg)
            assert result.objective >= result.initial_objective
            assert len(result.objective_trace) == tiny_cfg.counter_steps + 1
            assert np.abs(result.delta).max() <= tiny_cfg.counter_budget

    def test_objective_replays(self, tiny_encoder, tiny_images, tiny_cfg):
        image = tiny_images[0]
        anchor = encode(tiny_encoder, image)
        start = init_noise(1.0, 0.02, image.shape, make_rng(8))
        result = optimize_counterattack(tiny_encoder, image, start, tiny_cfg, anchor=anchor)
        assert counterattack_objective(tiny_encoder, image, result.delta, anchor) == pytest.approx(
            result.objective, abs=EXACT
        )


class TestTte:
    def test_identity_only_matches_plain(self, tiny_encoder, tiny_clf, tiny_images):
        cfg = DefenseConfig(tte_transforms=(Tte.Identity,))
        np.testing.assert_allclose(
            tte_predict(tiny_encoder, tiny_clf, tiny_images[0], cfg),
            classify(tiny_clf, encode(tiny_encoder, tiny_images[0])),
            atol=EXACT,
        )

    def test_disabled_is_plain(self, tiny_encoder, tiny_clf, tiny_images):
        cfg = DefenseConfig(tte_enabled=False)
        np.testing.assert_array_equal(
            tte_predict(tiny_encoder, tiny_clf, tiny_images[1], cfg),
            classify(tiny_clf, encode(tiny_encoder, tiny_images[1])),
        )

    def test_mean_of_two(self, tiny_encoder, tiny_clf, tiny_images):
        image = tiny_images[2]
        cfg = DefenseConfig(tte_transforms=(Tte.Identity, Tte.HFlip))
        a = classify(tiny_clf, encode(tiny_encoder, image))
        b = classify(tiny_clf, encode(tiny_encoder, hflip(image)))
        np.testing.assert_allclose(tte_predict(tiny_encoder, tiny_clf, image, cfg), (a + b) / 2, atol=EXACT)

    def test_symmetric_image_gives_equal_flip_members(self, tiny_encoder, tiny_clf, tiny_images):
        image = 0.5 * (tiny_images[3] + hflip(tiny_images[3]))
        np.testing.assert_array_equal(hflip(image), image)

        def member(name):
            cfg = DefenseConfig(tte_transforms=(name,), tte_crop_fraction=0.75)
            return tte_predict(tiny_encoder, tiny_clf, image, cfg)

        np.testing.assert_array_equal(member(Tte.HFlip), member(Tte.Identity))
        np.testing.assert_allclose(member(Tte.HFlipCenterCrop), member(Tte.CenterCrop), atol=1e-12)
