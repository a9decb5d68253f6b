from .datasets import Dataset, SyntheticDatasetSpec, generate_synthetic, nearest_pattern
from .evaluate import (
    ABLATION_ROWS,
    TRACE_COLUMNS,
    AblationStudy,
    EvalReport,
    EvaluationCache,
    FptEvaluation,
    ModelBundle,
    TraceRow,
    ablation_study,
    evaluate,
    with_ablation,
)
from .idx import load_idx, read_idx, write_idx
from .metrics import GapEstimate, accuracy, bootstrap_mean_gap, detector_auc
from .report import SCHEMA, emit_report, read_report, validate_report_json
from .run_config import RunConfig, parse_fraction
from .sweep import SweepTable, sweep, write_sweep_csv

__all__ = [
    "ABLATION_ROWS",
    "AblationStudy",
    "Dataset",
    "EvalReport",
    "EvaluationCache",
    "FptEvaluation",
    "GapEstimate",
    "ModelBundle",
    "RunConfig",
    "SCHEMA",
    "SweepTable",
    "SyntheticDatasetSpec",
    "TRACE_COLUMNS",
    "TraceRow",
    "ablation_study",
    "accuracy",
    "bootstrap_mean_gap",
    "detector_auc",
    "emit_report",
    "evaluate",
    "generate_synthetic",
    "load_idx",
    "nearest_pattern",
    "parse_fraction",
    "read_idx",
    "read_report",
    "sweep",
    "validate_report_json",
    "with_ablation",
    "write_idx",
    "write_sweep_csv",
]
