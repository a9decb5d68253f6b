import json

import pandas as pd
import pytest

from fpt_harness import (
    ABLATION_ROWS,
    TRACE_COLUMNS,
    EvaluationCache,
    FptEvaluation,
    RunConfig,
    ablation_study,
    emit_report,
    evaluate,
    read_report,
    sweep,
    validate_report_json,
    write_sweep_csv,
)
from fpt_harness.sweep import parse_sweep_value
from fpt_utils.constants import Branch, SweepParam
from fpt_utils.errors import FormatError, UsageError


@pytest.fixture
def run(small_run_values):
    return RunConfig(small_run_values)


@pytest.fixture
def report(run):
    return evaluate(run)


class TestEvaluate:
    def test_report_shape(self, report):
        assert report.num_images == 12
        assert len(report.traces) == 24
        assert [row.index for row in report.traces] == list(range(24))
        assert sum(report.branch_histogram.values()) == 24
        assert set(report.branch_histogram) == set(Branch.ALL)
        assert report.attack == "pgd2-eps8/255"
        for name in ("fpt_auc", "ttc_auc", "clean_accuracy", "defended_robust_accuracy"):
            assert 0.0 <= getattr(report, name) <= 1.0
        assert report.ttc_clean_accuracy is not None
        assert report.r_gap_low <= report.r_gap <= report.r_gap_high

    def test_weights_are_saved_and_reused(self, run, report):
        assert run.weights_path.exists()
        again = evaluate(run)
        assert again.summary() == report.summary()

    def test_limit(self, small_run_values):
        small_run_values["dataset"]["limit"] = 5
        assert evaluate(RunConfig(small_run_values)).num_images == 5

    def test_everything_off_matches_undefended(self, small_run_values):
        small_run_values["defense"].update(sigma_min=0.0, sigma_max=0.0, counter_budget=0.0)
        small_run_values["ablation"] = {"dfm_on": False, "fpt_on": False, "sar_on": False, "tte_on": False}
        small_run_values["ttc_baseline"] = False
        report = evaluate(RunConfig(small_run_values))
        assert report.defended_clean_accuracy == report.clean_accuracy
        assert report.defended_robust_accuracy == report.robust_accuracy
        assert all(row.final_linf == 0.0 for row in report.traces)

    def test_baseline_can_be_skipped(self, small_run_values):
        small_run_values["ttc_baseline"] = False
        report = evaluate(RunConfig(small_run_values))
        assert report.ttc_clean_accuracy is None and report.ttc_robust_accuracy is None

    def test_same_result_for_any_worker_count(self, small_run_values, tmp_path):
        outputs = []
        for workers in (1, 3):
            values = dict(small_run_values, workers=workers, output={"dir": str(tmp_path / f"w{workers}")})
            run = RunConfig(values)
            emit_report(evaluate(run), run.output_dir, "csv")
            outputs.append(run.output_dir)
        for name in ("report.csv", "traces.csv"):
            assert (outputs[0] / name).read_bytes() == (outputs[1] / name).read_bytes()

    def test_cache_shares_the_attack(self, run):
        cache = EvaluationCache()
        evaluation = FptEvaluation(run, cache)
        train, data = evaluation.load_datasets()
        bundle = evaluation.prepare_model(train)
        assert evaluation.attack_population(bundle, data) is evaluation.attack_population(bundle, data)


class TestReportFiles:
    @pytest.mark.parametrize("fmt", ["csv", "json"])
    def test_round_trip(self, report, tmp_path, fmt):
        emit_report(report, tmp_path, fmt)
        assert read_report(tmp_path, fmt) == report

    def test_round_trip_without_baseline(self, small_run_values, tmp_path):
        small_run_values["ttc_baseline"] = False
        report = evaluate(RunConfig(small_run_values))
        emit_report(report, tmp_path, "csv")
        assert read_report(tmp_path, "csv") == report

    def test_json_layout(self, report, tmp_path):
        (path,) = emit_report(report, tmp_path, "json")
        payload = json.loads(path.read_text())
        validate_report_json(payload)
        assert list(payload["traces"][0]) == list(TRACE_COLUMNS)

    def test_trace_table(self, report, tmp_path):
        emit_report(report, tmp_path, "csv")
        frame = pd.read_csv(tmp_path / "traces.csv")
        assert list(frame.columns) == list(TRACE_COLUMNS)
        assert len(frame) == 24

    def test_schema_mismatch(self, report, tmp_path):
        (path,) = emit_report(report, tmp_path, "json")
        payload = json.loads(path.read_text())
        payload["schema"] = "other/9"
        with pytest.raises(FormatError):
            validate_report_json(payload)

    def test_histogram_must_match_traces(self, report, tmp_path):
        (path,) = emit_report(report, tmp_path, "json")
        payload = json.loads(path.read_text())
        payload["traces"] = payload["traces"][:-1]
        with pytest.raises(FormatError):
            validate_report_json(payload)

    def test_trace_count(self, report):
        assert report.num_traces == 2 * report.num_images == 24
        assert sum(report.branch_histogram.values()) == report.num_traces

    def test_trace_count_must_match_rows(self, report, tmp_path):
        (path,) = emit_report(report, tmp_path, "json")
        payload = json.loads(path.read_text())
        payload["summary"]["num_traces"] = report.num_images
        with pytest.raises(FormatError):
            validate_report_json(payload)

    def test_unknown_format(self, report, tmp_path):
        with pytest.raises(UsageError):
            emit_report(report, tmp_path, "xml")


class TestSweep:
    def test_unknown_param(self, run):
        with pytest.raises(UsageError):
            sweep("gamma", [1.0], run)

    def test_empty_values(self, run):
        with pytest.raises(UsageError):
            sweep(SweepParam.Beta, [], run)

    def test_beta_shifts_ratio_high_to_suppressed(self, small_run_values):
        small_run_values["ttc_baseline"] = False
        table = sweep(SweepParam.Beta, ["1.0", "1.125", "1.25", "10"], RunConfig(small_run_values))
        histograms = [report.branch_histogram for _, report in table.rows]
        ratio_high = [h[Branch.CounterFull_RatioHigh] for h in histograms]
        suppressed = [h[Branch.Suppressed] for h in histograms]
        assert ratio_high == sorted(ratio_high, reverse=True)
        assert suppressed == sorted(suppressed)
        assert len({h[Branch.CounterFull_TauHigh] for h in histograms}) == 1
        assert ratio_high[-1] == 0

    def test_value_parsing(self):
        assert parse_sweep_value(SweepParam.EpsilonA, "4/255") == 4 / 255
        assert parse_sweep_value(SweepParam.CounterSteps, "3") == 3
        with pytest.raises(UsageError):
            parse_sweep_value(SweepParam.Ablation, "most")

    def test_single_value_gives_one_row(self, run, tmp_path):
        table = sweep(SweepParam.Beta, ["1.125"], run)
        assert len(table.rows) == 1
        path = write_sweep_csv(table, tmp_path / "sweep.csv")
        frame = pd.read_csv(path)
        assert len(frame) == 1
        assert frame.loc[0, "value"] == 1.125
        assert "branch.Suppressed" in frame.columns

    def test_epsilon_sweep_changes_the_attack(self, run):
        table = sweep(SweepParam.EpsilonA, ["0", "8/255"], run, EvaluationCache())
        zero, full = (report for _, report in table.rows)
        assert zero.robust_accuracy == zero.clean_accuracy
        assert full.attack == "pgd2-eps8/255"


class TestAblation:
    def test_every_row_runs(self, run):
        study = ablation_study(run)
        assert set(study.reports) == set(ABLATION_ROWS)
        for report in study.reports.values():
            assert report.num_images == 12
        assert not any(
            row.branch == Branch.RandomNoise and row.tau > 0.32 for row in study.reports["none"].traces
        )
