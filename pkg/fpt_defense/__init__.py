from .config import DefenseConfig
from .counterattack import (
    CounterattackResult,
    adaptive_gain,
    counterattack_objective,
    init_noise,
    norm_ratio,
    optimize_counterattack,
    project_delta,
)
from .dfm import (
    DfmParams,
    dfm_dispersion,
    dfm_from_config,
    dfm_sigma,
    init_dfm,
    sigma_from_dispersion,
)
from .pipeline import DecisionTrace, defend, ttc_defend
from .regulation import Selection, select_final, suppression_weight
from .threshold import (
    compute_fpt,
    compute_ttc_tau,
    feature_drift,
    feature_perception_threshold,
    ttc_threshold,
    uniform_probe,
)
from .tte import tte_predict

__all__ = [
    "CounterattackResult",
    "DecisionTrace",
    "DefenseConfig",
    "DfmParams",
    "Selection",
    "adaptive_gain",
    "compute_fpt",
    "compute_ttc_tau",
    "counterattack_objective",
    "defend",
    "dfm_dispersion",
    "dfm_from_config",
    "dfm_sigma",
    "feature_drift",
    "feature_perception_threshold",
    "init_dfm",
    "init_noise",
    "norm_ratio",
    "optimize_counterattack",
    "project_delta",
    "select_final",
    "sigma_from_dispersion",
    "suppression_weight",
    "ttc_defend",
    "ttc_threshold",
    "tte_predict",
    "uniform_probe",
]
