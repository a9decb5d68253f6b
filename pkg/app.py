#!/usr/bin/env python3
"""Command-line entry point.

    python app.py eval --config fpt_config.yml --out out/ --format csv

Exit codes: 0 on success, 1 on usage or configuration errors, 2 on data, format or
numeric errors.
"""

import argparse
import json
import logging
import sys
from dataclasses import asdict
from typing import List, Optional

import numpy as np
import pandas as pd

from fpt_harness import (
    TRACE_COLUMNS,
    FptEvaluation,
    RunConfig,
    TraceRow,
    accuracy,
    emit_report,
    evaluate,
    sweep,
    write_idx,
    write_sweep_csv,
)
from fpt_utils.constants import AttackKind, Env, ReportFormat, SweepParam
from fpt_utils.errors import FptNoiseError, UsageError
from fpt_utils.logger import configure_logger, flush_delayed_handlers

logger = logging.getLogger(__name__)


class CliParser(argparse.ArgumentParser):
    """argparse reports usage problems through UsageError instead of exiting."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> CliParser:
    common = CliParser(add_help=False)
    common.add_argument("--config", help="run config (YAML or JSON)")
    common.add_argument("--seed", type=int, help="base seed")
    common.add_argument("--attack", choices=AttackKind.ALL, help="attack kind")
    common.add_argument("--eps", help="attack budget, e.g. 8/255")
    common.add_argument("--steps", type=int, help="PGD iterations")
    common.add_argument("--tau-init", dest="tau_init", help="FPT threshold")
    common.add_argument("--beta", help="norm-ratio threshold")
    common.add_argument("--no-dfm", dest="dfm_on", action="store_false", default=None)
    common.add_argument("--no-fpt", dest="fpt_on", action="store_false", default=None)
    common.add_argument("--no-sar", dest="sar_on", action="store_false", default=None)
    common.add_argument("--no-tte", dest="tte_on", action="store_false", default=None)
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", choices=ReportFormat.ALL, help="report format")
    common.add_argument("--workers", type=int, help="threads for per-image work")
    common.add_argument(
        "--timing", action="store_true", default=None, help="record per-image defense time"
    )

    parser = CliParser(prog="fpt-noise", description="FPT-Noise test-time defense")
    subparsers = parser.add_subparsers(dest="command", parser_class=CliParser)
    subparsers.required = True
    subparsers.add_parser("train", parents=[common], help="train the encoder and save weights")
    subparsers.add_parser("attack", parents=[common], help="attack the eval set, undefended")
    defend = subparsers.add_parser("defend", parents=[common], help="defend the eval set")
    defend.add_argument(
        "--population",
        choices=("clean", "adv", "both"),
        default="both",
        help="which images to defend",
    )
    subparsers.add_parser("eval", parents=[common], help="full evaluation report")
    sweep = subparsers.add_parser("sweep", parents=[common], help="evaluate a parameter grid")
    sweep.add_argument("--param", required=True, choices=SweepParam.ALL)
    sweep.add_argument("--values", required=True, help="comma-separated values")
    subparsers.add_parser("gen-data", parents=[common], help="write synthetic IDX files")
    return parser


def load_run(args: argparse.Namespace):
    run = RunConfig.from_file(args.config)
    if args.seed is not None:
        run.seed = args.seed
    if args.workers is not None:
        run.workers = args.workers
    if args.timing:
        run.record_timing = True
    if args.attack is not None:
        run.attack["kind"] = args.attack
    if args.eps is not None:
        run.attack["epsilon"] = args.eps
    if args.steps is not None:
        run.attack["steps"] = args.steps
    if args.tau_init is not None:
        run.defense["tau_init"] = args.tau_init
    if args.beta is not None:
        run.defense["beta"] = args.beta
    for flag in ("dfm_on", "fpt_on", "sar_on", "tte_on"):
        if getattr(args, flag) is not None:
            setattr(run.ablation, flag, getattr(args, flag))
    if args.out is not None:
        run.output.dir = args.out
    if args.format is not None:
        run.output.format = args.format
    run.validate()
    return run


def run_train(run) -> dict:
    evaluation = FptEvaluation(run)
    train, _ = evaluation.load_datasets()
    bundle = evaluation.prepare_model(train, retrain=True)
    return {"weights": str(run.weights_path), "train_accuracy": bundle.train_accuracy}


def run_attack(run) -> dict:
    evaluation = FptEvaluation(run)
    train, data = evaluation.load_datasets()
    bundle = evaluation.prepare_model(train)
    adversarial = evaluation.attack_population(bundle, data)
    clean_pred = evaluation.predict_population(bundle, data.images)
    adv_pred = evaluation.predict_population(bundle, adversarial)
    flat = (adversarial - data.images).reshape(len(data), -1)
    frame = pd.DataFrame(
        {
            "index": np.arange(len(data)),
            "label": data.labels,
            "clean_pred": clean_pred,
            "adv_pred": adv_pred,
            "linf": np.abs(flat).max(axis=1) if len(data) else np.zeros(0),
        }
    )
    path = run.output_dir / "attack.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    return {
        "attack": run.attack_config(0).name,
        "clean_accuracy": accuracy(clean_pred, data.labels),
        "robust_accuracy": accuracy(adv_pred, data.labels),
        "output": str(path),
    }


def run_defend(run, population: str) -> dict:
    evaluation = FptEvaluation(run)
    train, data = evaluation.load_datasets()
    bundle = evaluation.prepare_model(train)
    n = len(data)
    rows, result = [], {}
    if population in ("clean", "both"):
        traces = evaluation.defend_population(bundle, data.images, "defend-clean")
        rows += [TraceRow.from_trace(i, t, data.labels[i]) for i, t in enumerate(traces)]
        result["defended_clean_accuracy"] = accuracy([t.pred for t in traces], data.labels)
    if population in ("adv", "both"):
        adversarial = evaluation.attack_population(bundle, data)
        traces = evaluation.defend_population(bundle, adversarial, "defend-adv")
        rows += [TraceRow.from_trace(n + i, t, data.labels[i]) for i, t in enumerate(traces)]
        result["defended_robust_accuracy"] = accuracy([t.pred for t in traces], data.labels)
    path = run.traces_path
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame([asdict(r) for r in rows], columns=list(TRACE_COLUMNS)).to_csv(path, index=False)
    result["output"] = str(path)
    return result


def run_eval(run) -> dict:
    report = evaluate(run)
    paths = emit_report(report, run.output_dir, run.output.format)
    return {**report.summary(), "outputs": [str(p) for p in paths]}


def run_sweep(run, param: str, values: str) -> dict:
    table = sweep(param, [v.strip() for v in values.split(",") if v.strip()], run)
    path = write_sweep_csv(table, run.output_dir / "sweep.csv")
    return {"param": param, "rows": len(table.rows), "output": str(path)}


def run_gen_data(run) -> dict:
    train, data = FptEvaluation(run).load_datasets()
    out = run.output_dir
    write_idx(train, out / "train-images.idx", out / "train-labels.idx")
    write_idx(data, out / "eval-images.idx", out / "eval-labels.idx")
    return {"train_images": len(train), "eval_images": len(data), "output": str(out)}


def dispatch(args: argparse.Namespace) -> dict:
    run = load_run(args)
    if args.command == "train":
        return run_train(run)
    if args.command == "attack":
        return run_attack(run)
    if args.command == "defend":
        return run_defend(run, args.population)
    if args.command == "eval":
        return run_eval(run)
    if args.command == "sweep":
        return run_sweep(run, args.param, args.values)
    return run_gen_data(run)


def main(argv: Optional[List[str]] = None) -> int:
    configure_logger(logger, context={"code_version": Env.CODE_VERSION})
    command = None
    exit_code = 2
    success = False

    try:
        args = build_parser().parse_args(argv)
        command = args.command
        logger.info(f"Running {command}")
        result = dispatch(args)
        print(json.dumps(result, default=str))
        exit_code = 0
        success = True

    except FptNoiseError as e:
        exit_code = e.exit_code
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)

    except OSError as e:
        logger.error(f"I/O error: {e}")
        print(f"error: {e}", file=sys.stderr)

    except Exception:
        logger.exception("Failed to run the command.")

    finally:
        flush_delayed_handlers(
            {
                "success": success,
                "command": command,
                "code_version": Env.CODE_VERSION,
                "exit_code": exit_code,
            }
        )

    return exit_code


if __name__ == "__main__":
    sys.exit(main())
