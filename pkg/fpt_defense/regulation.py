"""Scene-aware regulation: decides how much of the counter-noise reaches the image."""

from typing import NamedTuple

import numpy as np

from fpt_utils.constants import Branch

from .config import DefenseConfig


class Selection(NamedTuple):
    delta: np.ndarray
    branch: str
    # multiplier applied to delta_c
    weight: float


def suppression_weight(tau: float, cfg: DefenseConfig) -> float:
    """W = exp((tau - tau_init) * w_scale); at most 1 on the branch that uses it."""
    return float(np.exp((tau - cfg.tau_init) * cfg.w_scale))


def select_final(tau: float, r: float, delta_c: np.ndarray, cfg: DefenseConfig) -> Selection:
    if tau > cfg.tau_init:
        return Selection(delta_c, Branch.CounterFull_TauHigh, 1.0)
    if r > cfg.beta:
        return Selection(delta_c, Branch.CounterFull_RatioHigh, 1.0)
    weight = suppression_weight(tau, cfg)
    return Selection(weight * delta_c, Branch.Suppressed, weight)
