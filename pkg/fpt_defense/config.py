from dataclasses import dataclass
from typing import Tuple

from fpt_utils.constants import Tte
from fpt_utils.errors import ConfigurationError


@dataclass
class DefenseConfig:
    """Every hyperparameter of the defense. Pixel budgets are in [0, 1] units."""

    tau_init: float = 0.32
    beta: float = 1.125
    k_min: float = 1.0
    k_max: float = 6.0
    w_scale: float = 10.0
    probe_eps_small: float = 4 / 255
    probe_eps_large: float = 32 / 255
    counter_steps: int = 2
    counter_budget: float = 4 / 255
    sigma_min: float = 2 / 255
    sigma_max: float = 16 / 255
    tte_enabled: bool = True
    tte_transforms: Tuple[str, ...] = Tte.DEFAULT
    tte_crop_fraction: float = 0.875
    seed: int = 0

    # DFM layout: the F-dim feature is split into dfm_tokens tokens
    dfm_tokens: int = 8
    dfm_heads: int = 2

    # Ablation switches (all on = the full pipeline)
    dfm_on: bool = True
    fpt_on: bool = True
    sar_on: bool = True

    # TTC comparison: single-probe threshold and its probe budget
    ttc_probe_eps: float = 4 / 255
    ttc_tau_threshold: float = 0.2

    def __post_init__(self):
        self.tte_transforms = tuple(self.tte_transforms)
        if not self.probe_eps_small <= self.probe_eps_large:
            raise ConfigurationError(
                f"probe_eps_small ({self.probe_eps_small}) must not exceed"
                f" probe_eps_large ({self.probe_eps_large})"
            )
        if not self.k_min <= self.k_max:
            raise ConfigurationError(f"k_min ({self.k_min}) exceeds k_max ({self.k_max})")
        if not 0 <= self.sigma_min <= self.sigma_max:
            raise ConfigurationError(
                f"need 0 <= sigma_min <= sigma_max, got {self.sigma_min}, {self.sigma_max}"
            )
        if not self.beta > 0:
            raise ConfigurationError(f"beta must be positive, got {self.beta}")
        if self.counter_steps < 1:
            raise ConfigurationError(f"counter_steps must be >= 1, got {self.counter_steps}")
        if not 0 <= self.counter_budget <= 1:
            raise ConfigurationError(f"counter_budget must lie in [0, 1], got {self.counter_budget}")
        if min(self.probe_eps_small, self.ttc_probe_eps) < 0:
            raise ConfigurationError("probe budgets must be non-negative")
        if self.dfm_tokens < 1 or self.dfm_heads < 1:
            raise ConfigurationError("dfm_tokens and dfm_heads must be positive")
        if not 0 < self.tte_crop_fraction <= 1:
            raise ConfigurationError(
                f"tte_crop_fraction must lie in (0, 1], got {self.tte_crop_fraction}"
            )
        if not self.tte_transforms:
            raise ConfigurationError("tte_transforms must name at least one transform")

    @property
    def fixed_sigma(self) -> float:
        """The sigma used when the modulator is switched off."""
        return 0.5 * (self.sigma_min + self.sigma_max)
