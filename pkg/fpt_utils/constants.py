import os


class Env:
    """Environment variables read by the CLI and the evaluation harness. Values given
    on the command line or in the run config take precedence over these.
    """

    # Log level for the fpt_* packages
    LOG_LEVEL = os.environ.get("FPT_LOG_LEVEL", "INFO")

    # Log level for everything else (numpy, scipy, sklearn warnings)
    ROOT_LOG_LEVEL = os.environ.get("FPT_ROOT_LOG_LEVEL", "WARNING")

    # Run config used when --config is not passed
    CONFIG_PATH = os.environ.get("FPT_CONFIG_PATH")

    # Default worker count for per-image evaluation
    WORKERS = os.environ.get("FPT_WORKERS")

    # Echoed into the log context so runs can be traced back to a commit
    CODE_VERSION = os.environ.get("CODE_VERSION", "dev")


class Branch:
    """Which case of the scene-aware rule produced the final perturbation."""

    CounterFull_TauHigh = "CounterFull_TauHigh"
    CounterFull_RatioHigh = "CounterFull_RatioHigh"
    Suppressed = "Suppressed"

    # Only produced with sar_on=false (sub-threshold images get the init noise)
    # and by the TTC baseline
    RandomNoise = "RandomNoise"
    TtcCounter = "TtcCounter"

    ALL = (
        CounterFull_TauHigh,
        CounterFull_RatioHigh,
        Suppressed,
        RandomNoise,
        TtcCounter,
    )


class AttackKind:
    FGSM = "fgsm"
    PGD = "pgd"

    ALL = (FGSM, PGD)


class ReportFormat:
    CSV = "csv"
    JSON = "json"

    ALL = (CSV, JSON)


class DatasetKind:
    Synthetic = "synthetic"
    Idx = "idx"

    ALL = (Synthetic, Idx)


class SweepParam:
    TauInit = "tau_init"
    Beta = "beta"
    CounterBudget = "counter_budget"
    SigmaMax = "sigma_max"
    CounterSteps = "counter_steps"
    EpsilonA = "epsilon_a"
    Ablation = "ablation"

    DEFENSE = (TauInit, Beta, CounterBudget, SigmaMax, CounterSteps)
    ALL = DEFENSE + (EpsilonA, Ablation)


class Tte:
    Identity = "identity"
    HFlip = "hflip"
    CenterCrop = "center_crop"
    HFlipCenterCrop = "hflip_center_crop"

    DEFAULT = (Identity, HFlip, CenterCrop, HFlipCenterCrop)
