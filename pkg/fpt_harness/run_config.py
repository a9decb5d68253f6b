import copy
import os
from dataclasses import asdict, fields
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Type

import yaml

from fpt_attacks import AttackConfig
from fpt_defense import DefenseConfig
from fpt_encoders import TrainConfig
from fpt_utils.constants import DatasetKind, Env, ReportFormat
from fpt_utils.errors import ConfigurationError
from fpt_utils.seeding import derive_seed

TOP_LEVEL_KEYS = (
    "seed",
    "workers",
    "record_timing",
    "ttc_baseline",
    "dataset",
    "encoder",
    "train",
    "attack",
    "defense",
    "ablation",
    "output",
)


def parse_fraction(value: Any) -> float:
    """Accept plain numbers and fraction strings such as "8/255"."""
    if isinstance(value, bool):
        raise ConfigurationError(f"expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    try:
        return float(Fraction(str(value).strip()))
    except (ValueError, ZeroDivisionError):
        raise ConfigurationError(f"expected a number or a fraction like 8/255, got {value!r}")


def _check_keys(values: dict, allowed, section: str):
    if not isinstance(values, dict):
        raise ConfigurationError(f"section '{section}' must be a mapping, got {values!r}")
    unknown = sorted(set(values) - set(allowed))
    if unknown:
        raise ConfigurationError(f"unknown keys in '{section}': {unknown}")


def _build(cls: Type, values: dict, section: str, **resolved):
    """Instantiate a config dataclass from a section, parsing fraction strings for its
    float fields."""
    float_fields = {f.name for f in fields(cls) if f.type in (float, Optional[float])}
    _check_keys(values, [f.name for f in fields(cls)], section)
    kwargs = dict(resolved)
    for key, value in values.items():
        if value is None:
            continue
        kwargs[key] = parse_fraction(value) if key in float_fields else value
    try:
        return cls(**kwargs)
    except TypeError as e:
        raise ConfigurationError(f"invalid '{section}' section: {e}")


class DatasetSection:
    def __init__(self, values: dict):
        _check_keys(
            values,
            (
                "kind",
                "classes",
                "train_per_class",
                "eval_per_class",
                "image_shape",
                "jitter",
                "contrast",
                "grid",
                "train_images",
                "train_labels",
                "eval_images",
                "eval_labels",
                "limit",
            ),
            "dataset",
        )
        self.kind: str = values.get("kind", DatasetKind.Synthetic)
        if self.kind not in DatasetKind.ALL:
            raise ConfigurationError(f"unknown dataset kind '{self.kind}'")
        self.classes = int(values.get("classes", 8))
        self.train_per_class = int(values.get("train_per_class", 25))
        self.eval_per_class = int(values.get("eval_per_class", 25))
        self.image_shape: Tuple[int, int, int] = tuple(
            int(v) for v in values.get("image_shape", (3, 32, 32))
        )
        self.jitter = parse_fraction(values.get("jitter", 0.01))
        self.contrast = parse_fraction(values.get("contrast", 0.15))
        self.grid = int(values.get("grid", 4))

        # IDX inputs, only read when kind == idx
        self.train_images: Optional[str] = values.get("train_images")
        self.train_labels: Optional[str] = values.get("train_labels")
        self.eval_images: Optional[str] = values.get("eval_images")
        self.eval_labels: Optional[str] = values.get("eval_labels")
        if self.kind == DatasetKind.Idx and not all(
            (self.train_images, self.train_labels, self.eval_images, self.eval_labels)
        ):
            raise ConfigurationError(
                "an idx dataset needs train_images, train_labels, eval_images and eval_labels"
            )

        # Evaluate only the first `limit` eval images
        self.limit: Optional[int] = values.get("limit")
        if self.limit is not None and int(self.limit) < 1:
            raise ConfigurationError(f"dataset limit must be positive, got {self.limit}")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "classes": self.classes,
            "train_per_class": self.train_per_class,
            "eval_per_class": self.eval_per_class,
            "image_shape": list(self.image_shape),
            "jitter": self.jitter,
            "contrast": self.contrast,
            "grid": self.grid,
            "train_images": self.train_images,
            "train_labels": self.train_labels,
            "eval_images": self.eval_images,
            "eval_labels": self.eval_labels,
            "limit": self.limit,
        }


class EncoderSection:
    def __init__(self, values: dict):
        _check_keys(
            values,
            (
                "kind",
                "patch_size",
                "embed_dim",
                "num_heads",
                "num_blocks",
                "feature_dim",
                "mlp_dim",
                "temperature",
                "weights",
            ),
            "encoder",
        )
        self.kind: str = values.get("kind", "vit")
        if self.kind not in ("vit", "linear"):
            raise ConfigurationError(f"unknown encoder kind '{self.kind}', expected vit or linear")
        self.patch_size = int(values.get("patch_size", 4))
        self.embed_dim = int(values.get("embed_dim", 64))
        self.num_heads = int(values.get("num_heads", 4))
        self.num_blocks = int(values.get("num_blocks", 2))
        self.feature_dim = int(values.get("feature_dim", 64))
        self.mlp_dim: Optional[int] = values.get("mlp_dim")
        self.temperature = parse_fraction(values.get("temperature", 20.0))

        # Explicit weight file; otherwise <output.dir>/weights.fptw
        self.weights: Optional[str] = values.get("weights")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "patch_size": self.patch_size,
            "embed_dim": self.embed_dim,
            "num_heads": self.num_heads,
            "num_blocks": self.num_blocks,
            "feature_dim": self.feature_dim,
            "mlp_dim": self.mlp_dim,
            "temperature": self.temperature,
            "weights": self.weights,
        }


class AblationSection:
    def __init__(self, values: dict):
        _check_keys(values, ("dfm_on", "fpt_on", "sar_on", "tte_on"), "ablation")
        self.dfm_on = bool(values.get("dfm_on", True))
        self.fpt_on = bool(values.get("fpt_on", True))
        self.sar_on = bool(values.get("sar_on", True))
        self.tte_on = bool(values.get("tte_on", True))

    def to_dict(self) -> dict:
        return {
            "dfm_on": self.dfm_on,
            "fpt_on": self.fpt_on,
            "sar_on": self.sar_on,
            "tte_on": self.tte_on,
        }


class OutputSection:
    def __init__(self, values: dict):
        _check_keys(values, ("dir", "format"), "output")
        self.dir: str = str(values.get("dir", "out"))
        self.format: str = values.get("format", ReportFormat.CSV)
        if self.format not in ReportFormat.ALL:
            raise ConfigurationError(
                f"unknown report format '{self.format}', expected one of {ReportFormat.ALL}"
            )

    def to_dict(self) -> dict:
        return {"dir": self.dir, "format": self.format}


class RunConfig:
    """Everything one evaluation run needs, read from a YAML (or JSON) document.

    The train, attack and defense sections map onto TrainConfig, AttackConfig and
    DefenseConfig field for field. Seeds left out of a section are derived from the
    base seed.
    """

    def __init__(self, values: Optional[dict] = None):
        values = copy.deepcopy(values or {})
        _check_keys(values, TOP_LEVEL_KEYS, "run")

        self.seed = int(values.get("seed", 0))
        self.workers = int(values.get("workers") or Env.WORKERS or 1)
        self.record_timing = bool(values.get("record_timing", False))
        self.ttc_baseline = bool(values.get("ttc_baseline", True))

        self.dataset = DatasetSection(values.get("dataset") or {})
        self.encoder = EncoderSection(values.get("encoder") or {})
        self.ablation = AblationSection(values.get("ablation") or {})
        self.output = OutputSection(values.get("output") or {})

        # Kept raw so that overrides and sweeps can edit single keys
        self.train: Dict[str, Any] = dict(values.get("train") or {})
        self.attack: Dict[str, Any] = dict(values.get("attack") or {})
        self.defense: Dict[str, Any] = dict(values.get("defense") or {})
        self.validate()

    @classmethod
    def from_file(cls, config_file_path=None) -> "RunConfig":
        """Loads the run settings from the given file, falling back to FPT_CONFIG_PATH
        and then to the fpt_config.yml at the repository root."""
        if not config_file_path:
            config_file_path = Env.CONFIG_PATH or RunConfig.get_config_file_path()
        try:
            with open(config_file_path, "r") as file:
                values = yaml.safe_load(file)
        except OSError as e:
            raise ConfigurationError(f"cannot read config file {config_file_path}: {e}")
        except yaml.YAMLError as e:
            raise ConfigurationError(f"config file {config_file_path} is not valid YAML: {e}")
        return cls(values or {})

    @staticmethod
    def get_config_file_path() -> str:
        harness_dir = os.path.dirname(os.path.realpath(__file__))
        repo_dir = os.path.dirname(harness_dir)
        return os.path.join(repo_dir, "fpt_config.yml")

    def validate(self):
        if self.workers < 1:
            raise ConfigurationError(f"workers must be >= 1, got {self.workers}")
        self.train_config
        self.defense_config
        self.attack_config(0)

    def copy(self) -> "RunConfig":
        return copy.deepcopy(self)

    @property
    def train_config(self) -> TrainConfig:
        seed = derive_seed(self.seed, "train")
        return _build(TrainConfig, self.train, "train", seed=seed)

    @property
    def defense_config(self) -> DefenseConfig:
        resolved = {
            "seed": derive_seed(self.seed, "dfm"),
            "dfm_on": self.ablation.dfm_on,
            "fpt_on": self.ablation.fpt_on,
            "sar_on": self.ablation.sar_on,
            "tte_enabled": self.ablation.tte_on,
        }
        return _build(DefenseConfig, self.defense, "defense", **resolved)

    def attack_config(self, index: int) -> AttackConfig:
        """Attack settings for eval image `index`. A PGD random start is drawn from the
        image's own stream when `random_start` is set."""
        values = dict(self.attack)
        random_start = bool(values.pop("random_start", False))
        seed = derive_seed(self.seed, "attack", index) if random_start else None
        return _build(AttackConfig, values, "attack", seed=seed)

    @property
    def output_dir(self) -> Path:
        return Path(self.output.dir)

    @property
    def weights_path(self) -> Path:
        if self.encoder.weights:
            return Path(self.encoder.weights)
        return self.output_dir / "weights.fptw"

    @property
    def report_path(self) -> Path:
        return self.output_dir / f"report.{self.output.format}"

    @property
    def traces_path(self) -> Path:
        return self.output_dir / "traces.csv"

    def to_dict(self) -> dict:
        """The effective configuration, derived seeds included. The worker count and
        the output directory are left out since neither changes any result."""
        train = asdict(self.train_config)
        defense = asdict(self.defense_config)
        defense["tte_transforms"] = list(defense["tte_transforms"])
        for flag in ("dfm_on", "fpt_on", "sar_on", "tte_enabled"):
            defense.pop(flag)
        attack = asdict(self.attack_config(0))
        attack.pop("seed")
        attack["random_start"] = bool(self.attack.get("random_start", False))
        return {
            "seed": self.seed,
            "record_timing": self.record_timing,
            "ttc_baseline": self.ttc_baseline,
            "dataset": self.dataset.to_dict(),
            "encoder": self.encoder.to_dict(),
            "train": train,
            "attack": attack,
            "defense": defense,
            "ablation": self.ablation.to_dict(),
            "output": {"format": self.output.format},
        }
