"""Command-line interface: train, predict, simulate, tune, eval.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from scipy.special import expit

from . import __version__
from .boosting import (
    BoostConfig,
    fit,
    load_model,
    pathway_weights,
    predict_scores,
    save_model,
)
from .data import CLASSIFICATION, REGRESSION, SURVIVAL
from .dataio import (
    align_encoded_clinical,
    encode_clinical,
    ingest,
    parse_gmt,
    read_clinical,
    read_expression,
    read_gene_weights,
    read_outcome,
    write_clinical_csv,
    write_expression_csv,
    write_gmt,
    write_manifest,
    write_outcome_csv,
    write_predictions_csv,
    write_weights_csv,
)
from .errors import DataError, NumericError, OutcomeTypeMismatch, PKBError
from .kernels import KernelSpec
from .metrics import binary_log_loss, c_index, classification_error, mse
from .simulate import SimDesign, simulate_dataset

KERNEL_CHOICES = {"rbf": ("rbf", 3), "poly3": ("poly", 3)}

TUNE_KERNELS = ["rbf", "poly3"]
TUNE_LEARNING_RATES = [0.01, 0.05]
TUNE_PENALTY_MULTIPLIERS = [0.04, 0.2, 1.0]


def _thread_count() -> int:
    try:
        return max(1, int(os.environ.get("PKB_THREADS", "1")))
    except ValueError:
        return 1


def _require_files(parser, args, flags):
    for flag in flags:
        path = getattr(args, flag.strip("-").replace("-", "_"))
        if path is not None and not Path(path).exists():
            parser.error(f"{flag}: file not found: {path}")


def _kernel_spec(name: str, gene_weights_path=None) -> KernelSpec:
    kind, degree = KERNEL_CHOICES[name]
    weights = read_gene_weights(gene_weights_path) if gene_weights_path else None
    return KernelSpec(kind=kind, degree=degree, gene_weights=weights)


def _add_data_flags(sub):
    sub.add_argument("--expression", required=True, help="expression CSV (sample x gene)")
    sub.add_argument("--clinical", required=True, help="clinical CSV (sample x feature)")
    sub.add_argument("--outcome", required=True, help="outcome CSV")
    sub.add_argument("--pathways", required=True, help="pathway GMT file")
    sub.add_argument(
        "--outcome-type",
        required=True,
        choices=[REGRESSION, CLASSIFICATION, SURVIVAL],
        help="outcome type of the outcome file",
    )
    sub.add_argument("--gene-weights", default=None, help="optional gene,weight CSV")


def _add_fit_flags(sub):
    sub.add_argument("--penalty", default="l2", choices=["l1", "l2"], help="penalty on beta")
    sub.add_argument("--penalty-multiplier", type=float, default=1.0, help="scales the penalty anchor")
    sub.add_argument("--kernel", default="rbf", choices=sorted(KERNEL_CHOICES), help="kernel family")
    sub.add_argument("--learning-rate", type=float, default=0.05, help="shrinkage in (0,1)")
    sub.add_argument("--max-iter", type=int, default=1500, help="iteration cap")
    sub.add_argument("--seed", type=int, default=0, help="random seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pkb",
        description="Pathway kernel boosting for regression, classification, and survival outcomes.",
    )
    parser.add_argument("--version", action="version", version=f"pkb {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    train = commands.add_parser("train", help="fit a model and write it with pathway weights")
    _add_data_flags(train)
    _add_fit_flags(train)
    train.add_argument("--out", required=True, help="output directory")
    train.set_defaults(func=cmd_train)

    predict = commands.add_parser("predict", help="score new samples with a trained model")
    predict.add_argument("--model", required=True, help="model JSON from train")
    predict.add_argument("--expression", required=True, help="expression CSV")
    predict.add_argument("--clinical", default=None, help="clinical CSV (required if the model uses it)")
    predict.add_argument("--out", required=True, help="output directory")
    predict.set_defaults(func=cmd_predict)

    simulate = commands.add_parser("simulate", help="generate a benchmark dataset")
    simulate.add_argument("--model", type=int, required=True, choices=[1, 2, 3], help="score model")
    simulate.add_argument("--pathways", type=int, default=20, choices=[20, 50], help="pathway count")
    simulate.add_argument(
        "--outcome-type", required=True, choices=[REGRESSION, SURVIVAL], help="outcome mechanism"
    )
    simulate.add_argument("--n", type=int, default=300, help="sample size")
    simulate.add_argument("--seed", type=int, default=0, help="random seed")
    simulate.add_argument("--out", required=True, help="output directory")
    simulate.set_defaults(func=cmd_simulate)

    tune = commands.add_parser("tune", help="grid-search kernel, learning rate, and penalty multiplier")
    _add_data_flags(tune)
    tune.add_argument("--penalty", default="l2", choices=["l1", "l2"], help="penalty on beta")
    tune.add_argument("--kernels", default=",".join(TUNE_KERNELS), help="comma list of kernels")
    tune.add_argument(
        "--learning-rates",
        default=",".join(str(v) for v in TUNE_LEARNING_RATES),
        help="comma list of learning rates",
    )
    tune.add_argument(
        "--penalty-multipliers",
        default=",".join(str(v) for v in TUNE_PENALTY_MULTIPLIERS),
        help="comma list of penalty multipliers",
    )
    tune.add_argument("--max-iter", type=int, default=1500, help="iteration cap")
    tune.add_argument("--seed", type=int, default=0, help="random seed")
    tune.add_argument("--out", required=True, help="output directory")
    tune.set_defaults(func=cmd_tune)

    evaluate = commands.add_parser("eval", help="score a prediction file against an outcome file")
    evaluate.add_argument("--predictions", required=True, help="predictions CSV from predict")
    evaluate.add_argument("--outcome", required=True, help="outcome CSV")
    evaluate.add_argument(
        "--outcome-type", required=True, choices=[REGRESSION, CLASSIFICATION, SURVIVAL]
    )
    evaluate.add_argument("--out", default=None, help="optional output directory for metrics.json")
    evaluate.set_defaults(func=cmd_eval)

    return parser


def cmd_train(args) -> int:
    pathways = parse_gmt(args.pathways)
    dataset, kept, report = ingest(
        args.expression, args.clinical, args.outcome, pathways, args.outcome_type
    )
    print(f"ingested: {report.summary()}")
    config = BoostConfig(
        learning_rate=args.learning_rate,
        penalty=args.penalty,
        penalty_multiplier=args.penalty_multiplier,
        kernel=_kernel_spec(args.kernel, args.gene_weights),
        max_iterations=args.max_iter,
        seed=args.seed,
    )
    model = fit(dataset, kept, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_model(model, out / "model.json")
    write_weights_csv(out / "pathway_weights.csv", pathway_weights(model))
    write_manifest(
        out,
        "train",
        {
            "outcome_type": args.outcome_type,
            "penalty": args.penalty,
            "penalty_multiplier": args.penalty_multiplier,
            "kernel": args.kernel,
            "learning_rate": args.learning_rate,
            "max_iter": args.max_iter,
            "resolved_lambda": model.lam,
        },
        {
            "expression": args.expression,
            "clinical": args.clinical,
            "outcome": args.outcome,
            "pathways": args.pathways,
            "gene_weights": args.gene_weights,
        },
        args.seed,
    )
    selected = sum(1 for w in pathway_weights(model).values() if w > 0)
    print(
        f"trained: T={model.t_selected} iterations, lambda={model.lam:.6g}, "
        f"{selected}/{len(model.pathway_names)} pathways selected"
    )
    print(f"wrote {out / 'model.json'}")
    return 0


def cmd_predict(args) -> int:
    model = load_model(args.model)
    expression, gene_ids, sample_ids = read_expression(args.expression)
    clinical, clin_names = None, None
    if model.clinical.columns:
        if args.clinical is None:
            raise DataError("model uses clinical features; pass --clinical")
        clin_df = read_clinical(args.clinical)
        missing = [s for s in sample_ids if s not in set(clin_df.index)]
        if missing:
            raise DataError(f"clinical file lacks samples: {missing[:5]}")
        clinical, clin_names, raw_cols = encode_clinical(clin_df.loc[sample_ids])
        clinical, clin_names = align_encoded_clinical(
            clinical, clin_names, raw_cols, model.clinical.columns
        )
    scores = predict_scores(model, expression, gene_ids, clinical, clin_names)
    if model.outcome_type == CLASSIFICATION:
        values = expit(scores)
    elif model.outcome_type == SURVIVAL:
        values = np.exp(scores)
    else:
        values = scores
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_predictions_csv(out / "predictions.csv", sample_ids, scores, values, model.outcome_type)
    write_manifest(
        out,
        "predict",
        {"outcome_type": model.outcome_type},
        {"model": args.model, "expression": args.expression, "clinical": args.clinical},
        model.config.seed,
    )
    print(f"wrote {out / 'predictions.csv'} ({len(sample_ids)} samples)")
    return 0


def cmd_simulate(args) -> int:
    design = SimDesign(
        model=args.model,
        pathway_count=args.pathways,
        outcome_type=args.outcome_type,
        sample_size=args.n,
        seed=args.seed,
    )
    result = simulate_dataset(design)
    ds = result.dataset
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_expression_csv(out / "expression.csv", ds.expression, ds.gene_ids, ds.sample_ids)
    write_clinical_csv(out / "clinical.csv", ds.clinical, ds.clinical_names, ds.sample_ids)
    write_outcome_csv(out / "outcome.csv", ds.outcome, ds.sample_ids)
    write_gmt(result.pathways, out / "pathways.gmt")
    truth = {
        "model": design.model,
        "informative_pathways": result.informative_pathways,
        "weibull_scale": result.weibull_scale,
        "weibull_shape": design.shape if design.outcome_type == SURVIVAL else None,
        "scores": {s: float(v) for s, v in zip(ds.sample_ids, result.scores)},
    }
    with open(out / "truth.json", "w", encoding="utf-8") as fh:
        json.dump(truth, fh, indent=2)
    write_manifest(
        out,
        "simulate",
        {
            "model": args.model,
            "pathways": args.pathways,
            "outcome_type": args.outcome_type,
            "n": args.n,
        },
        {},
        args.seed,
    )
    print(f"wrote simulated dataset ({args.n} samples, {args.pathways} pathways) to {out}")
    return 0


def cmd_tune(args) -> int:
    pathways = parse_gmt(args.pathways)
    dataset, kept, report = ingest(
        args.expression, args.clinical, args.outcome, pathways, args.outcome_type
    )
    print(f"ingested: {report.summary()}")
    kernels = [k.strip() for k in args.kernels.split(",") if k.strip()]
    unknown = [k for k in kernels if k not in KERNEL_CHOICES]
    if unknown:
        raise DataError(f"unknown kernel(s) in --kernels: {unknown}")
    rates = [float(v) for v in args.learning_rates.split(",") if v.strip()]
    multipliers = [float(v) for v in args.penalty_multipliers.split(",") if v.strip()]
    grid = list(itertools.product(kernels, rates, multipliers))

    def run_cell(cell):
        kernel, rate, multiplier = cell
        config = BoostConfig(
            learning_rate=rate,
            penalty=args.penalty,
            penalty_multiplier=multiplier,
            kernel=_kernel_spec(kernel, args.gene_weights),
            max_iterations=args.max_iter,
            seed=args.seed,
        )
        model = fit(dataset, kept, config)
        return {
            "kernel": kernel,
            "learning_rate": rate,
            "penalty_multiplier": multiplier,
            "cv_loss": min(model.cv_losses),
            "t_selected": model.t_selected,
        }

    workers = min(_thread_count(), len(grid))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run_cell, grid))
    else:
        rows = [run_cell(cell) for cell in grid]

    best = min(rows, key=lambda r: r["cv_loss"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    import pandas as pd

    pd.DataFrame(rows).to_csv(out / "tune_results.csv", index=False)
    with open(out / "best_config.json", "w", encoding="utf-8") as fh:
        json.dump(best, fh, indent=2)
    write_manifest(
        out,
        "tune",
        {"penalty": args.penalty, "grid_size": len(grid), "max_iter": args.max_iter},
        {
            "expression": args.expression,
            "clinical": args.clinical,
            "outcome": args.outcome,
            "pathways": args.pathways,
            "gene_weights": args.gene_weights,
        },
        args.seed,
    )
    print(
        f"best: kernel={best['kernel']} learning_rate={best['learning_rate']} "
        f"penalty_multiplier={best['penalty_multiplier']} cv_loss={best['cv_loss']:.6g}"
    )
    return 0


def cmd_eval(args) -> int:
    import pandas as pd

    pred = pd.read_csv(args.predictions, float_precision="round_trip")
    if "sample" not in pred.columns:
        pred = pred.rename(columns={pred.columns[0]: "sample"})
    pred["sample"] = pred["sample"].astype(str)
    pred = pred.set_index("sample")
    outcome, ids = read_outcome(args.outcome, args.outcome_type)
    common = [s for s in ids if s in set(pred.index)]
    if len(common) < 2:
        raise DataError("fewer than 2 samples shared by predictions and outcome")
    pos = {s: i for i, s in enumerate(ids)}
    outcome = outcome.subset(np.array([pos[s] for s in common]))
    pred = pred.loc[common]

    def column(*names):
        for name in names:
            if name in pred.columns:
                return pred[name].to_numpy(dtype=float)
        raise DataError(f"predictions file lacks a usable column (looked for {names})")

    if args.outcome_type == REGRESSION:
        metrics = {"mse": mse(outcome.y, column("prediction", "score"))}
    elif args.outcome_type == SURVIVAL:
        result = c_index(outcome.time, outcome.event, column("risk", "score"))
        metrics = {
            "c_index": result.c_index,
            "concordance": result.concordance,
            "permissible_pairs": result.permissible_pairs,
        }
    else:
        scores = column("score", "probability")
        prob = column("probability", "score")
        metrics = {
            "error_rate": classification_error(outcome.y, prob),
            "log_loss": binary_log_loss(outcome.y, scores),
        }
    for key, value in metrics.items():
        print(f"{key}: {value:.6g}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "metrics.json", "w", encoding="utf-8") as fh:
            json.dump(metrics, fh, indent=2)
        write_manifest(
            out,
            "eval",
            {"outcome_type": args.outcome_type},
            {"predictions": args.predictions, "outcome": args.outcome},
            None,
        )
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    input_flags = [
        "--expression",
        "--clinical",
        "--outcome",
        "--pathways",
        "--gene-weights",
        "--model",
        "--predictions",
    ]
    present = [f for f in input_flags if hasattr(args, f.strip("-").replace("-", "_"))]
    if args.command != "simulate":
        _require_files(parser, args, present)
    try:
        return args.func(args)
    except OutcomeTypeMismatch as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"usage error: missing file: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except (DataError, PKBError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
