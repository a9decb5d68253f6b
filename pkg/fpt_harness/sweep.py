import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, List, Sequence, Tuple, Union

import pandas as pd

from fpt_utils.constants import SweepParam
from fpt_utils.errors import UsageError

from .evaluate import ABLATION_ROWS, EvalReport, EvaluationCache, evaluate, with_ablation
from .run_config import RunConfig, parse_fraction

logger = logging.getLogger(__name__)


@dataclass
class SweepTable:
    param: str
    rows: List[Tuple[Any, EvalReport]] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        records = []
        for value, report in self.rows:
            record = {"param": self.param, "value": value}
            record.update(report.summary())
            record.update({f"branch.{k}": v for k, v in report.branch_histogram.items()})
            records.append(record)
        return pd.DataFrame.from_records(records)


def parse_sweep_value(param: str, value: Any) -> Any:
    if param == SweepParam.Ablation:
        if value not in ABLATION_ROWS:
            raise UsageError(
                f"ablation sweep values must be among {list(ABLATION_ROWS)}, got '{value}'"
            )
        return value
    if param == SweepParam.CounterSteps:
        try:
            return int(value)
        except (TypeError, ValueError):
            raise UsageError(f"counter_steps values must be integers, got '{value}'")
    return parse_fraction(value)


def sweep_run(run: RunConfig, param: str, value: Any) -> RunConfig:
    """A copy of `run` with one parameter replaced."""
    if param == SweepParam.Ablation:
        return with_ablation(run, value)
    variant = run.copy()
    if param == SweepParam.EpsilonA:
        variant.attack["epsilon"] = value
    else:
        variant.defense[param] = value
    variant.validate()
    return variant


def sweep(
    param: str,
    values: Sequence[Any],
    run: RunConfig,
    cache: EvaluationCache = None,
) -> SweepTable:
    """One EvalReport per value of `param`; model and data are shared across rows.

    Raises:
        UsageError: for an unknown parameter or an empty value list.
    """
    if param not in SweepParam.ALL:
        raise UsageError(f"cannot sweep '{param}', expected one of {SweepParam.ALL}")
    if not values:
        raise UsageError("sweep needs at least one value")
    cache = cache if cache is not None else EvaluationCache()
    table = SweepTable(param)
    for raw in values:
        value = parse_sweep_value(param, raw)
        logger.info(f"Sweep {param} = {value}")
        table.rows.append((value, evaluate(sweep_run(run, param, value), cache)))
    return table


def write_sweep_csv(table: SweepTable, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_frame().to_csv(path, index=False)
    return path
