from dataclasses import dataclass
from typing import Optional

from fpt_utils.constants import AttackKind
from fpt_utils.errors import ConfigurationError


@dataclass
class AttackConfig:
    """White-box L-inf attack settings.

    Attributes:
        epsilon: L-inf budget in pixel units (8/255 = 0.0314...).
        steps: PGD iterations (FGSM ignores it).
        step_size: per-step magnitude; None means 2 * epsilon / steps.
        seed: random-start seed; None starts at the clean image.
        kind: "pgd" or "fgsm".
    """

    epsilon: float = 8 / 255
    steps: int = 10
    step_size: Optional[float] = None
    seed: Optional[int] = None
    kind: str = AttackKind.PGD

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigurationError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.steps < 1:
            raise ConfigurationError(f"steps must be >= 1, got {self.steps}")
        if self.step_size is not None and not self.step_size > 0:
            raise ConfigurationError(f"step size must be positive, got {self.step_size}")
        if self.kind not in AttackKind.ALL:
            raise ConfigurationError(
                f"unknown attack '{self.kind}', expected one of {AttackKind.ALL}"
            )

    @property
    def resolved_step_size(self) -> float:
        if self.step_size is not None:
            return self.step_size
        return 2.0 * self.epsilon / self.steps

    @property
    def name(self) -> str:
        if self.kind == AttackKind.FGSM:
            return f"fgsm-eps{self.epsilon * 255:g}/255"
        return f"pgd{self.steps}-eps{self.epsilon * 255:g}/255"
