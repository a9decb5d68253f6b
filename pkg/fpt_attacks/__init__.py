from .config import AttackConfig
from .gradient import classification_loss, loss_and_input_gradient
from .projected import attack, fgsm, pgd, project

__all__ = [
    "AttackConfig",
    "attack",
    "classification_loss",
    "fgsm",
    "loss_and_input_gradient",
    "pgd",
    "project",
]
