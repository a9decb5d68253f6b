import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from fpt_attacks import attack
from fpt_defense import DecisionTrace, DfmParams, defend, dfm_from_config, ttc_defend
from fpt_encoders import (
    EncoderParams,
    LinearEncoderParams,
    PrototypeClassifier,
    classify,
    encode,
    feature_norm,
    init_encoder,
    load_weights,
    save_weights,
    train_encoder,
)
from fpt_encoders.training import accuracy as train_set_accuracy
from fpt_utils.constants import Branch, DatasetKind
from fpt_utils.errors import ConfigurationError
from fpt_utils.seeding import derive_seed, derived_rng

from .datasets import Dataset, SyntheticDatasetSpec, generate_synthetic
from .idx import load_idx
from .metrics import accuracy, bootstrap_mean_gap, detector_auc
from .run_config import RunConfig

logger = logging.getLogger(__name__)

Params = Union[EncoderParams, LinearEncoderParams]

# Ablation rows: which of the three modules stay on
ABLATION_ROWS: Dict[str, Dict[str, bool]] = {
    "full": {"dfm_on": True, "fpt_on": True, "sar_on": True},
    "dfm+fpt": {"dfm_on": True, "fpt_on": True, "sar_on": False},
    "dfm+sar": {"dfm_on": True, "fpt_on": False, "sar_on": True},
    "fpt+sar": {"dfm_on": False, "fpt_on": True, "sar_on": True},
    "none": {"dfm_on": False, "fpt_on": False, "sar_on": False},
}


@dataclass
class TraceRow:
    index: int
    tau: float
    ttc_tau: float
    sigma: float
    k: float
    r: float
    w: float
    branch: str
    final_linf: float
    pred: int
    label: int
    timing_ms: float

    @classmethod
    def from_trace(cls, index: int, trace: DecisionTrace, label: int) -> "TraceRow":
        return cls(
            index=index,
            tau=trace.tau,
            ttc_tau=trace.ttc_tau,
            sigma=trace.sigma,
            k=trace.k,
            r=trace.r,
            w=trace.w,
            branch=trace.branch,
            final_linf=trace.final_perturbation_linf,
            pred=trace.pred,
            label=int(label),
            timing_ms=trace.timing_ms,
        )


TRACE_COLUMNS = tuple(f.name for f in fields(TraceRow))


@dataclass
class EvalReport:
    """Summary of one evaluation. Trace rows hold the clean population (indices 0..N-1)
    followed by the attacked one (N..2N-1), so `num_traces` and the branch histogram
    total are 2N while `num_images` is N."""

    num_images: int
    num_traces: int
    attack: str
    train_accuracy: float
    clean_accuracy: float
    robust_accuracy: float
    defended_clean_accuracy: float
    defended_robust_accuracy: float
    ttc_clean_accuracy: Optional[float]
    ttc_robust_accuracy: Optional[float]
    fpt_auc: float
    ttc_auc: float
    mean_feature_norm_clean: float
    mean_feature_norm_adv: float
    mean_r_clean: float
    mean_r_adv: float
    r_gap: float
    r_gap_low: float
    r_gap_high: float
    mean_defense_ms: float
    branch_histogram: Dict[str, int] = field(default_factory=dict)
    traces: List[TraceRow] = field(default_factory=list, repr=False)
    config: dict = field(default_factory=dict, repr=False)

    def summary(self) -> dict:
        return {name: getattr(self, name) for name in SUMMARY_FIELDS}


SUMMARY_FIELDS = tuple(
    f.name for f in fields(EvalReport) if f.name not in ("branch_histogram", "traces", "config")
)


@dataclass
class ModelBundle:
    params: Params
    clf: PrototypeClassifier
    dfm: DfmParams
    train_accuracy: float


class EvaluationCache:
    """Datasets, trained models and attacked images shared between runs whose relevant
    config sections agree (sweeps and ablations)."""

    def __init__(self):
        self.entries: Dict[Tuple[str, str], object] = {}

    def get_or_create(self, kind: str, key: dict, factory: Callable[[], object]):
        cache_key = (kind, json.dumps(key, sort_keys=True, default=str))
        if cache_key not in self.entries:
            self.entries[cache_key] = factory()
        return self.entries[cache_key]


def with_ablation(run: RunConfig, row: str) -> RunConfig:
    if row not in ABLATION_ROWS:
        raise ConfigurationError(f"unknown ablation row '{row}', expected one of {list(ABLATION_ROWS)}")
    variant = run.copy()
    for flag, value in ABLATION_ROWS[row].items():
        setattr(variant.ablation, flag, value)
    return variant


class FptEvaluation:
    """FptEvaluation

    Runs one evaluation end to end: data, model (trained if no weight file exists),
    white-box attack, FPT-Noise defense of both populations, the single-probe
    baseline, and the report. Per-image work is mapped over a thread pool; every
    image draws from its own derived stream, so results do not depend on the worker
    count.
    """

    def __init__(self, run: RunConfig, cache: Optional[EvaluationCache] = None):
        self.run = run
        self.cache = cache if cache is not None else EvaluationCache()

    def map_images(self, fn: Callable, count: int) -> list:
        if self.run.workers == 1:
            return [fn(i) for i in range(count)]
        with ThreadPoolExecutor(
            max_workers=self.run.workers, thread_name_prefix="fpt-eval"
        ) as executor:
            return list(executor.map(fn, range(count)))

    def load_datasets(self) -> Tuple[Dataset, Dataset]:
        ds = self.run.dataset

        def factory():
            if ds.kind == DatasetKind.Idx:
                logger.info(f"Loading IDX data from {ds.train_images} and {ds.eval_images}")
                return (
                    load_idx(ds.train_images, ds.train_labels),
                    load_idx(ds.eval_images, ds.eval_labels),
                )
            spec = self.synthetic_spec(ds.train_per_class)
            eval_spec = self.synthetic_spec(ds.eval_per_class)
            return generate_synthetic(spec, "train"), generate_synthetic(eval_spec, "eval")

        train, evaluation = self.cache.get_or_create(
            "datasets", {"seed": self.run.seed, "dataset": ds.to_dict()}, factory
        )
        return train, evaluation.head(ds.limit)

    def synthetic_spec(self, per_class: int) -> SyntheticDatasetSpec:
        ds = self.run.dataset
        return SyntheticDatasetSpec(
            classes=ds.classes,
            per_class=per_class,
            image_shape=ds.image_shape,
            seed=self.run.seed,
            jitter=ds.jitter,
            contrast=ds.contrast,
            grid=ds.grid,
        )

    def init_params(self, image_shape) -> Params:
        enc = self.run.encoder
        seed = derive_seed(self.run.seed, "encoder-init")
        if enc.kind == "linear":
            return LinearEncoderParams.random(image_shape, enc.feature_dim, seed)
        return init_encoder(
            image_shape,
            patch_size=enc.patch_size,
            embed_dim=enc.embed_dim,
            num_heads=enc.num_heads,
            num_blocks=enc.num_blocks,
            feature_dim=enc.feature_dim,
            mlp_dim=enc.mlp_dim,
            seed=seed,
        )

    def prepare_model(self, train: Dataset, retrain: bool = False) -> ModelBundle:
        """Load the weight file if it exists, otherwise (or with `retrain`) train and
        save one."""
        run = self.run
        num_classes = int(train.labels.max()) + 1 if len(train) else 1
        if run.dataset.kind == DatasetKind.Synthetic:
            num_classes = run.dataset.classes
        clf = PrototypeClassifier.from_seed(
            num_classes,
            run.encoder.feature_dim,
            run.encoder.temperature,
            seed=derive_seed(run.seed, "prototypes"),
        )

        def factory() -> Params:
            path = run.weights_path
            if path.exists() and not retrain:
                logger.info(f"Loading encoder weights from {path}")
                params = load_weights(path)
                if tuple(params.image_shape) != train.image_shape:
                    raise ConfigurationError(
                        f"weights in {path} expect images {params.image_shape},"
                        f" data has {train.image_shape}"
                    )
                return params
            logger.info(f"Training a {run.encoder.kind} encoder on {len(train)} images")
            result = train_encoder(self.init_params(train.image_shape), clf, train, run.train_config)
            path.parent.mkdir(parents=True, exist_ok=True)
            save_weights(result.params, path)
            logger.info(f"Saved encoder weights to {path}")
            return result.params

        params = self.cache.get_or_create("model", self.model_key(), factory)
        if params.feature_dim != clf.feature_dim:
            raise ConfigurationError(
                f"encoder feature dim {params.feature_dim} does not match the configured"
                f" {clf.feature_dim}"
            )
        return ModelBundle(
            params=params,
            clf=clf,
            dfm=dfm_from_config(params.feature_dim, run.defense_config),
            train_accuracy=train_set_accuracy(params, clf, train.images, train.labels),
        )

    def model_key(self) -> dict:
        return {
            "seed": self.run.seed,
            "dataset": self.run.dataset.to_dict(),
            "encoder": self.run.encoder.to_dict(),
            "train": self.run.to_dict()["train"],
            "weights": str(self.run.weights_path),
        }

    def predict_population(self, bundle: ModelBundle, images: np.ndarray) -> np.ndarray:
        def one(i):
            return int(np.argmax(classify(bundle.clf, encode(bundle.params, images[i]))))

        return np.asarray(self.map_images(one, len(images)), dtype=np.int64)

    def attack_population(self, bundle: ModelBundle, data: Dataset) -> np.ndarray:
        run = self.run

        def factory():
            logger.info(f"Attacking {len(data)} images with {run.attack_config(0).name}")

            def one(i):
                return attack(data.images[i], int(data.labels[i]), bundle.params, bundle.clf, run.attack_config(i))

            return np.stack(self.map_images(one, len(data))) if len(data) else data.images.copy()

        key = {"model": self.model_key(), "attack": run.to_dict()["attack"], "limit": run.dataset.limit}
        return self.cache.get_or_create("attack", key, factory)

    def defend_population(
        self, bundle: ModelBundle, images: np.ndarray, tag: str
    ) -> List[DecisionTrace]:
        cfg = self.run.defense_config

        def one(i):
            rng = derived_rng(self.run.seed, tag, i)
            return defend(bundle.params, bundle.clf, bundle.dfm, images[i], cfg, rng, self.run.record_timing)[1]

        return self.map_images(one, len(images))

    def ttc_population(
        self, bundle: ModelBundle, images: np.ndarray, tag: str
    ) -> List[DecisionTrace]:
        cfg = self.run.defense_config

        def one(i):
            rng = derived_rng(self.run.seed, tag, i)
            return ttc_defend(bundle.params, bundle.clf, images[i], cfg, rng, self.run.record_timing)[1]

        return self.map_images(one, len(images))

    def run_evaluation(self) -> EvalReport:
        run = self.run
        logger.info(f"Starting evaluation with {run.workers} worker(s)")
        train, data = self.load_datasets()
        bundle = self.prepare_model(train)
        n = len(data)
        labels = data.labels

        adversarial = self.attack_population(bundle, data)
        clean_pred = self.predict_population(bundle, data.images)
        adv_pred = self.predict_population(bundle, adversarial)

        logger.info(f"Defending {2 * n} images")
        clean_traces = self.defend_population(bundle, data.images, "defend-clean")
        adv_traces = self.defend_population(bundle, adversarial, "defend-adv")

        ttc_clean_acc = ttc_robust_acc = None
        if run.ttc_baseline:
            logger.info("Running the single-probe baseline")
            ttc_clean = self.ttc_population(bundle, data.images, "ttc-clean")
            ttc_adv = self.ttc_population(bundle, adversarial, "ttc-adv")
            ttc_clean_acc = accuracy([t.pred for t in ttc_clean], labels)
            ttc_robust_acc = accuracy([t.pred for t in ttc_adv], labels)

        traces = [TraceRow.from_trace(i, t, labels[i]) for i, t in enumerate(clean_traces)]
        traces += [TraceRow.from_trace(n + i, t, labels[i]) for i, t in enumerate(adv_traces)]
        report = self.build_report(
            bundle, data, adversarial, clean_pred, adv_pred, clean_traces, adv_traces, traces
        )
        report.ttc_clean_accuracy = ttc_clean_acc
        report.ttc_robust_accuracy = ttc_robust_acc
        logger.info(
            f"clean {report.clean_accuracy:.3f} robust {report.robust_accuracy:.3f}"
            f" defended clean {report.defended_clean_accuracy:.3f}"
            f" defended robust {report.defended_robust_accuracy:.3f}"
            f" FPT AUC {report.fpt_auc:.3f} TTC AUC {report.ttc_auc:.3f}"
        )
        return report

    def build_report(
        self,
        bundle: ModelBundle,
        data: Dataset,
        adversarial: np.ndarray,
        clean_pred: np.ndarray,
        adv_pred: np.ndarray,
        clean_traces: Sequence[DecisionTrace],
        adv_traces: Sequence[DecisionTrace],
        traces: List[TraceRow],
    ) -> EvalReport:
        labels = data.labels
        n = len(data)
        histogram = {branch: 0 for branch in Branch.ALL}
        for trace in list(clean_traces) + list(adv_traces):
            histogram[trace.branch] += 1

        def mean(values) -> float:
            return float(np.mean(values)) if len(values) else 0.0

        def auc(clean, adv) -> float:
            return detector_auc(clean, adv) if n else 0.5

        r_clean = [t.r for t in clean_traces]
        r_adv = [t.r for t in adv_traces]
        if n:
            gap = bootstrap_mean_gap(r_adv, r_clean, derived_rng(self.run.seed, "bootstrap"))
        else:
            gap = (0.0, 0.0, 0.0)

        return EvalReport(
            num_images=n,
            num_traces=len(traces),
            attack=self.run.attack_config(0).name,
            train_accuracy=bundle.train_accuracy,
            clean_accuracy=accuracy(clean_pred, labels),
            robust_accuracy=accuracy(adv_pred, labels),
            defended_clean_accuracy=accuracy([t.pred for t in clean_traces], labels),
            defended_robust_accuracy=accuracy([t.pred for t in adv_traces], labels),
            ttc_clean_accuracy=None,
            ttc_robust_accuracy=None,
            fpt_auc=auc([t.tau for t in clean_traces], [t.tau for t in adv_traces]),
            # small single-probe drift flags an attack, so score on -tau
            ttc_auc=auc([-t.ttc_tau for t in clean_traces], [-t.ttc_tau for t in adv_traces]),
            mean_feature_norm_clean=mean(
                [feature_norm(encode(bundle.params, x)) for x in data.images]
            ),
            mean_feature_norm_adv=mean(
                [feature_norm(encode(bundle.params, x)) for x in adversarial]
            ),
            mean_r_clean=mean(r_clean),
            mean_r_adv=mean(r_adv),
            r_gap=gap[0],
            r_gap_low=gap[1],
            r_gap_high=gap[2],
            mean_defense_ms=mean([t.timing_ms for t in list(clean_traces) + list(adv_traces)]),
            branch_histogram=histogram,
            traces=traces,
            config=self.run.to_dict(),
        )


def evaluate(run: RunConfig, cache: Optional[EvaluationCache] = None) -> EvalReport:
    return FptEvaluation(run, cache).run_evaluation()


@dataclass
class AblationStudy:
    reports: Dict[str, EvalReport]

    @property
    def full_is_max(self) -> bool:
        best = max(r.defended_robust_accuracy for r in self.reports.values())
        return self.reports["full"].defended_robust_accuracy >= best

    @property
    def full_beats_none(self) -> bool:
        return (
            self.reports["full"].defended_robust_accuracy
            >= self.reports["none"].defended_robust_accuracy
        )


def ablation_study(run: RunConfig, cache: Optional[EvaluationCache] = None) -> AblationStudy:
    """Evaluate every ablation row on one shared model and attacked population."""
    cache = cache if cache is not None else EvaluationCache()
    reports = {row: evaluate(with_ablation(run, row), cache) for row in ABLATION_ROWS}
    study = AblationStudy(reports)
    if not study.full_is_max:
        logger.warning("the full pipeline is not the most robust ablation row")
    return study
