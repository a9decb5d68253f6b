"""End-to-end test-time defense of a single image, plus the single-probe baseline it is
compared against. Both are pure given (weights, config, rng)."""

import logging
import time
from dataclasses import asdict, dataclass
from typing import List, Tuple

import numpy as np

from fpt_encoders import FeatureEncoder, PrototypeClassifier, check_image, classify, encode
from fpt_utils.constants import Branch
from fpt_utils.errors import DegenerateFeatureError
from fpt_utils.seeding import make_rng

from .config import DefenseConfig
from .counterattack import (
    adaptive_gain,
    init_noise,
    norm_ratio,
    optimize_counterattack,
    project_delta,
)
from .dfm import DfmParams, dfm_sigma
from .regulation import select_final
from .threshold import compute_fpt, compute_ttc_tau, uniform_probe
from .tte import tte_predict

logger = logging.getLogger(__name__)


@dataclass
class DecisionTrace:
    tau: float
    ttc_tau: float
    sigma: float
    k: float
    r: float
    w: float
    branch: str
    final_perturbation_linf: float
    timing_ms: float
    pred: int

    def to_dict(self) -> dict:
        return asdict(self)


def _streams(rng: np.random.Generator, count: int) -> List[np.random.Generator]:
    # one stream per purpose; a stage that is switched off consumes none of the
    # other stages' draws
    seeds = rng.integers(0, np.iinfo(np.int64).max, size=count)
    return [make_rng(int(seed)) for seed in seeds]


def _elapsed_ms(start: float, record_timing: bool) -> float:
    return (time.perf_counter() - start) * 1000.0 if record_timing else 0.0


def defend(
    encoder: FeatureEncoder,
    clf: PrototypeClassifier,
    dfm: DfmParams,
    image: np.ndarray,
    cfg: DefenseConfig,
    rng: np.random.Generator,
    record_timing: bool = False,
) -> Tuple[int, DecisionTrace]:
    """Defend one image and classify the result.

    encode -> sigma -> tau -> k -> initial noise -> counterattack -> scene-aware
    selection -> X_def = clip(X + delta_final) -> ensembled prediction.

    Args:
        encoder (FeatureEncoder): the (frozen) image encoder.
        clf (PrototypeClassifier): the cosine head.
        dfm (DfmParams): fixed modulator weights.
        image (np.ndarray): a C x H x W image in [0, 1].
        cfg (DefenseConfig): hyperparameters and ablation switches.
        rng (np.random.Generator): the image's own stream.
        record_timing (bool): measure wall time into the trace.

    Returns:
        Tuple[int, DecisionTrace]: the predicted class and the decision record.

    Raises:
        DegenerateFeatureError: when ||f(X)|| is zero.
    """
    start = time.perf_counter()
    image = check_image(encoder, image)
    feature = encode(encoder, image)
    if not np.any(feature):
        raise DegenerateFeatureError("||f(X)|| is zero, the image cannot be defended")
    probe_rng, ttc_rng, noise_rng = _streams(rng, 3)

    sigma = dfm_sigma(feature, dfm, cfg) if cfg.dfm_on else cfg.fixed_sigma
    ttc_tau = compute_ttc_tau(encoder, image, cfg.ttc_probe_eps, ttc_rng, anchor=feature)
    if cfg.fpt_on:
        tau = compute_fpt(encoder, image, cfg, probe_rng, anchor=feature)
    else:
        tau = ttc_tau
    k = adaptive_gain(tau, cfg)
    delta_init = init_noise(k, sigma, image.shape, noise_rng)

    if not cfg.sar_on and tau <= cfg.tau_init:
        delta_final = project_delta(image, delta_init, cfg.counter_budget)
        r = norm_ratio(encoder, image, delta_final, anchor=feature)
        branch, w = Branch.RandomNoise, 1.0
    else:
        result = optimize_counterattack(encoder, image, delta_init, cfg, anchor=feature)
        r = norm_ratio(encoder, image, result.delta, anchor=feature)
        delta_final, branch, w = select_final(tau, r, result.delta, cfg)

    defended = np.clip(image + delta_final, 0.0, 1.0)
    pred = int(np.argmax(tte_predict(encoder, clf, defended, cfg)))
    trace = DecisionTrace(
        tau=float(tau),
        ttc_tau=float(ttc_tau),
        sigma=float(sigma),
        k=k,
        r=r,
        w=float(w),
        branch=branch,
        final_perturbation_linf=float(np.max(np.abs(defended - image))),
        timing_ms=_elapsed_ms(start, record_timing),
        pred=pred,
    )
    logger.debug(f"defend: {trace}")
    return pred, trace


def ttc_defend(
    encoder: FeatureEncoder,
    clf: PrototypeClassifier,
    image: np.ndarray,
    cfg: DefenseConfig,
    rng: np.random.Generator,
    record_timing: bool = False,
) -> Tuple[int, DecisionTrace]:
    """Single-probe baseline: images whose drift ratio is at most ttc_tau_threshold
    are treated as falsely stable and get the full counterattack from a uniform start;
    the rest get the uniform start alone. No ensembling."""
    start = time.perf_counter()
    image = check_image(encoder, image)
    feature = encode(encoder, image)
    ttc_rng, noise_rng = _streams(rng, 2)

    ttc_tau = compute_ttc_tau(encoder, image, cfg.ttc_probe_eps, ttc_rng, anchor=feature)
    delta_start = uniform_probe(noise_rng, image.shape, cfg.counter_budget)
    if ttc_tau <= cfg.ttc_tau_threshold:
        delta = optimize_counterattack(encoder, image, delta_start, cfg, anchor=feature).delta
        branch = Branch.TtcCounter
    else:
        delta = project_delta(image, delta_start, cfg.counter_budget)
        branch = Branch.RandomNoise

    defended = np.clip(image + delta, 0.0, 1.0)
    pred = int(np.argmax(classify(clf, encode(encoder, defended))))
    trace = DecisionTrace(
        tau=float(ttc_tau),
        ttc_tau=float(ttc_tau),
        sigma=float(cfg.counter_budget),
        k=1.0,
        r=norm_ratio(encoder, image, delta, anchor=feature),
        w=1.0,
        branch=branch,
        final_perturbation_linf=float(np.max(np.abs(defended - image))),
        timing_ms=_elapsed_ms(start, record_timing),
        pred=pred,
    )
    return pred, trace
