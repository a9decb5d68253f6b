"""Counter-noise: the adaptive initial noise and its drift-maximizing refinement."""

import logging
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from fpt_autodiff import Graph, ops
from fpt_encoders import FeatureEncoder, check_image, encode
from fpt_utils.errors import DegenerateFeatureError

from .config import DefenseConfig

logger = logging.getLogger(__name__)


class CounterattackResult(NamedTuple):
    delta: np.ndarray
    objective: float
    initial_objective: float
    # objective of every iterate, the start included
    objective_trace: List[float]


def adaptive_gain(tau: float, cfg: DefenseConfig) -> float:
    """k = clamp(exp(tau - tau_init), k_min, k_max)."""
    return float(np.clip(np.exp(tau - cfg.tau_init), cfg.k_min, cfg.k_max))


def init_noise(k: float, sigma: float, shape, rng: np.random.Generator) -> np.ndarray:
    """k * sigma * eps0 with eps0 i.i.d. standard normal."""
    return k * sigma * rng.standard_normal(size=shape)


def project_delta(image: np.ndarray, delta: np.ndarray, budget: float) -> np.ndarray:
    delta = np.clip(delta, -budget, budget)
    # second clip absorbs rounding in (x + d) - x
    return np.clip(np.clip(image + delta, 0.0, 1.0) - image, -budget, budget)


def counterattack_objective(
    encoder: FeatureEncoder, image: np.ndarray, delta: np.ndarray, anchor: np.ndarray
) -> float:
    """||f(X + delta) - anchor|| with X + delta clipped to [0, 1]."""
    return float(np.linalg.norm(encode(encoder, np.clip(image + delta, 0.0, 1.0)) - anchor))


def _objective_and_gradient(
    encoder: FeatureEncoder, image: np.ndarray, delta: np.ndarray, anchor: np.ndarray
) -> Tuple[float, np.ndarray]:
    graph = Graph()
    x = graph.leaf(np.clip(image + delta, 0.0, 1.0)[None], requires_grad=True)
    drift = ops.l2_norm(ops.sub(encoder.forward(graph, x), anchor[None]))
    return drift.item(), graph.backward(drift)[x][0]


def optimize_counterattack(
    encoder: FeatureEncoder,
    image: np.ndarray,
    delta_init: np.ndarray,
    cfg: DefenseConfig,
    anchor: Optional[np.ndarray] = None,
) -> CounterattackResult:
    """Sign-gradient ascent on the drift from the fixed anchor f(X).

    Starts from delta_init clipped to the counter budget, takes counter_steps steps of
    size counter_budget with projection after each, and returns the best iterate seen.
    """
    image = check_image(encoder, image)
    anchor = encode(encoder, image) if anchor is None else np.asarray(anchor, dtype=np.float64)
    budget = cfg.counter_budget

    delta = project_delta(image, np.asarray(delta_init, dtype=np.float64), budget)
    trace: List[float] = []
    best, best_objective = delta, -np.inf
    for _ in range(cfg.counter_steps):
        objective, grad = _objective_and_gradient(encoder, image, delta, anchor)
        trace.append(objective)
        if objective > best_objective:
            best, best_objective = delta, objective
        delta = project_delta(image, delta + budget * np.sign(grad), budget)

    final_objective = counterattack_objective(encoder, image, delta, anchor)
    trace.append(final_objective)
    if final_objective > best_objective:
        best, best_objective = delta, final_objective
    return CounterattackResult(best, best_objective, trace[0], trace)


def norm_ratio(
    encoder: FeatureEncoder,
    image: np.ndarray,
    delta_c: np.ndarray,
    anchor: Optional[np.ndarray] = None,
) -> float:
    """r = ||f(X + delta_c)|| / ||f(X)||.

    Raises:
        DegenerateFeatureError: when ||f(X)|| is zero.
    """
    image = check_image(encoder, image)
    feature = encode(encoder, image) if anchor is None else anchor
    base = float(np.linalg.norm(feature))
    if base == 0:
        raise DegenerateFeatureError("||f(X)|| is zero, the norm ratio is undefined")
    if not np.any(delta_c):
        return 1.0
    return float(np.linalg.norm(encode(encoder, np.clip(image + delta_c, 0.0, 1.0)))) / base
