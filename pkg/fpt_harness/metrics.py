from typing import NamedTuple, Sequence

import numpy as np
from sklearn.metrics import roc_auc_score

from fpt_utils.errors import InputError


class GapEstimate(NamedTuple):
    gap: float
    low: float
    high: float

    @property
    def positive(self) -> bool:
        return self.low > 0


def detector_auc(clean_scores: Sequence[float], adv_scores: Sequence[float]) -> float:
    """Area under the ROC curve with higher scores meaning "adversarial"; ties count
    half.

    Raises:
        InputError: when either population is empty.
    """
    clean = np.asarray(clean_scores, dtype=np.float64).reshape(-1)
    adv = np.asarray(adv_scores, dtype=np.float64).reshape(-1)
    if clean.size == 0 or adv.size == 0:
        raise InputError("detector AUC needs non-empty clean and adversarial populations")
    if not (np.all(np.isfinite(clean)) and np.all(np.isfinite(adv))):
        raise InputError("detector scores must be finite")
    y_true = np.concatenate([np.zeros(clean.size), np.ones(adv.size)])
    return float(roc_auc_score(y_true, np.concatenate([clean, adv])))


def accuracy(predictions: Sequence[int], labels: Sequence[int]) -> float:
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise InputError(
            f"{predictions.shape[0]} predictions for {labels.shape[0]} labels"
        )
    if labels.size == 0:
        return 0.0
    return float(np.mean(predictions == labels))


def bootstrap_mean_gap(
    treated: Sequence[float],
    control: Sequence[float],
    rng: np.random.Generator,
    resamples: int = 1000,
    confidence: float = 0.95,
) -> GapEstimate:
    """mean(treated) - mean(control) with a percentile bootstrap interval; each
    population is resampled independently."""
    treated = np.asarray(treated, dtype=np.float64)
    control = np.asarray(control, dtype=np.float64)
    if treated.size == 0 or control.size == 0:
        raise InputError("bootstrap needs two non-empty populations")
    draws_t = rng.integers(0, treated.size, size=(resamples, treated.size))
    draws_c = rng.integers(0, control.size, size=(resamples, control.size))
    gaps = treated[draws_t].mean(axis=1) - control[draws_c].mean(axis=1)
    tail = 100.0 * (1.0 - confidence) / 2.0
    low, high = np.percentile(gaps, [tail, 100.0 - tail])
    return GapEstimate(float(treated.mean() - control.mean()), float(low), float(high))
