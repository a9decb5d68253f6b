"""Report files.

csv:  <dir>/report.csv  key,value rows: every summary field, one `branch.<name>` row
                        per branch, and a `config` row holding the effective config
                        as JSON.
      <dir>/traces.csv  one row per defended image, columns
                        index,tau,ttc_tau,sigma,k,r,w,branch,final_linf,pred,label,timing_ms
json: <dir>/report.json {"schema": SCHEMA, "config": {...}, "summary": {...},
                         "branch_histogram": {branch: count}, "traces": [{column: value}]}

Floats are written in their shortest round-trip form, so reading a report back gives
the exact values. An absent baseline accuracy is an empty cell (csv) or null (json).
The branch histogram counts every trace row, clean and attacked, so it sums to
`num_traces`, which is twice `num_images`.
"""

import json
import logging
from dataclasses import asdict, fields
from pathlib import Path
from typing import List, Union

import pandas as pd

from fpt_utils.constants import Branch, ReportFormat
from fpt_utils.errors import FormatError, UsageError

from .evaluate import SUMMARY_FIELDS, TRACE_COLUMNS, EvalReport, TraceRow

logger = logging.getLogger(__name__)

SCHEMA = "fpt-noise-report/1"

_FIELD_TYPES = {f.name: f.type for f in fields(EvalReport)}
_TRACE_TYPES = {f.name: f.type for f in fields(TraceRow)}


def _check_format(fmt: str):
    if fmt not in ReportFormat.ALL:
        raise UsageError(f"unknown report format '{fmt}', expected one of {ReportFormat.ALL}")


def _traces_frame(report: EvalReport) -> pd.DataFrame:
    return pd.DataFrame([asdict(row) for row in report.traces], columns=list(TRACE_COLUMNS))


def emit_report(report: EvalReport, out_dir: Union[str, Path], fmt: str) -> List[Path]:
    """Write the report and its trace table. Returns the written paths.

    Raises:
        OSError: when the directory or files cannot be written.
    """
    _check_format(fmt)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if fmt == ReportFormat.JSON:
        path = out_dir / "report.json"
        payload = {
            "schema": SCHEMA,
            "config": report.config,
            "summary": report.summary(),
            "branch_histogram": report.branch_histogram,
            "traces": [asdict(row) for row in report.traces],
        }
        path.write_text(json.dumps(payload, indent=2) + "\n")
        logger.info(f"Wrote {path}")
        return [path]

    rows = [(name, "" if value is None else value) for name, value in report.summary().items()]
    rows += [(f"branch.{name}", count) for name, count in report.branch_histogram.items()]
    rows.append(("config", json.dumps(report.config, sort_keys=True)))
    summary_path = out_dir / "report.csv"
    pd.DataFrame(rows, columns=["key", "value"]).to_csv(summary_path, index=False)
    traces_path = out_dir / "traces.csv"
    _traces_frame(report).to_csv(traces_path, index=False)
    logger.info(f"Wrote {summary_path} and {traces_path}")
    return [summary_path, traces_path]


def _convert(name: str, value, types: dict):
    kind = types[name]
    if value is None or value == "":
        return None
    if kind is int:
        return int(value)
    if kind is str:
        return str(value)
    return float(value)


def validate_report_json(payload: dict) -> None:
    """Check a parsed report.json against the documented layout.

    Raises:
        FormatError: on a missing key, a wrong schema tag or a malformed trace row.
    """
    if not isinstance(payload, dict):
        raise FormatError("report must be a JSON object")
    missing = {"schema", "config", "summary", "branch_histogram", "traces"} - set(payload)
    if missing:
        raise FormatError(f"report is missing {sorted(missing)}")
    if payload["schema"] != SCHEMA:
        raise FormatError(f"unsupported report schema '{payload['schema']}'")
    if set(payload["summary"]) != set(SUMMARY_FIELDS):
        raise FormatError("report summary fields do not match the schema")
    unknown = set(payload["branch_histogram"]) - set(Branch.ALL)
    if unknown:
        raise FormatError(f"unknown branches in histogram: {sorted(unknown)}")
    for i, row in enumerate(payload["traces"]):
        if list(row) != list(TRACE_COLUMNS):
            raise FormatError(f"trace row {i} does not have the columns {TRACE_COLUMNS}")
    if sum(payload["branch_histogram"].values()) != len(payload["traces"]):
        raise FormatError("branch histogram does not sum to the number of trace rows")
    if payload["summary"]["num_traces"] != len(payload["traces"]):
        raise FormatError("summary num_traces does not match the number of trace rows")


def _report_from_parts(summary: dict, histogram: dict, traces: List[dict], config: dict):
    values = {name: _convert(name, summary.get(name), _FIELD_TYPES) for name in SUMMARY_FIELDS}
    rows = [
        TraceRow(**{c: _convert(c, row[c], _TRACE_TYPES) for c in TRACE_COLUMNS}) for row in traces
    ]
    return EvalReport(
        **values,
        branch_histogram={k: int(v) for k, v in histogram.items()},
        traces=rows,
        config=config,
    )


def read_report(out_dir: Union[str, Path], fmt: str) -> EvalReport:
    """Parse a report written by emit_report back into an EvalReport."""
    _check_format(fmt)
    out_dir = Path(out_dir)

    if fmt == ReportFormat.JSON:
        try:
            payload = json.loads((out_dir / "report.json").read_text())
        except json.JSONDecodeError as e:
            raise FormatError(f"report.json is not valid JSON: {e.msg}", e.pos)
        validate_report_json(payload)
        return _report_from_parts(
            payload["summary"], payload["branch_histogram"], payload["traces"], payload["config"]
        )

    summary = pd.read_csv(out_dir / "report.csv", dtype=str, keep_default_na=False)
    pairs = dict(zip(summary["key"], summary["value"]))
    histogram = {
        key[len("branch.") :]: value for key, value in pairs.items() if key.startswith("branch.")
    }
    traces = pd.read_csv(out_dir / "traces.csv", dtype=str, keep_default_na=False)
    if list(traces.columns) != list(TRACE_COLUMNS):
        raise FormatError(f"traces.csv columns {list(traces.columns)} != {list(TRACE_COLUMNS)}")
    return _report_from_parts(
        pairs,
        histogram,
        traces.to_dict(orient="records"),
        json.loads(pairs.get("config", "{}")),
    )
