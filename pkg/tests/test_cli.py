"""Black-box tests for the command-line interface, exit codes included.

Most invocations call main() in process for speed; one subprocess test pins
the module entry point end to end.
"""

import json
import subprocess
import sys
import warnings
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from pkb.cli import main

FIXTURES = Path(__file__).parent / "fixtures"


def run_cli(*argv):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return main(list(argv))


def train_args(out_dir, outcome="survival", extra=()):
    outcome_file = {
        "survival": FIXTURES / "outcome_survival.csv",
        "regression": FIXTURES / "outcome_regression.csv",
    }[outcome]
    return [
        "train",
        "--expression", str(FIXTURES / "expression.csv"),
        "--clinical", str(FIXTURES / "clinical.csv"),
        "--outcome", str(outcome_file),
        "--pathways", str(FIXTURES / "pathways.gmt"),
        "--outcome-type", outcome,
        "--penalty", "l2",
        "--penalty-multiplier", "1.0",
        "--kernel", "rbf",
        "--learning-rate", "0.05",
        "--max-iter", "30",
        "--seed", "3",
        "--out", str(out_dir),
        *extra,
    ]


class TestTrainPredictEval:
    def test_full_pipeline(self, tmp_path):
        train_out = tmp_path / "train"
        assert run_cli(*train_args(train_out)) == 0
        assert (train_out / "model.json").exists()
        assert (train_out / "pathway_weights.csv").exists()
        assert (train_out / "manifest.json").exists()

        predict_out = tmp_path / "predict"
        code = run_cli(
            "predict",
            "--model", str(train_out / "model.json"),
            "--expression", str(FIXTURES / "expression.csv"),
            "--clinical", str(FIXTURES / "clinical.csv"),
            "--out", str(predict_out),
        )
        assert code == 0
        predictions = pd.read_csv(predict_out / "predictions.csv")
        assert list(predictions.columns) == ["sample", "score", "risk"]
        assert len(predictions) == 50

        # training-set predictions reproduce the fit's final internal scores
        model_doc = json.loads((train_out / "model.json").read_text())
        np.testing.assert_allclose(
            predictions["score"].to_numpy(),
            np.asarray(model_doc["trace"]["final_train_scores"]),
            atol=1e-10,
        )

        eval_out = tmp_path / "eval"
        code = run_cli(
            "eval",
            "--predictions", str(predict_out / "predictions.csv"),
            "--outcome", str(FIXTURES / "outcome_survival.csv"),
            "--outcome-type", "survival",
            "--out", str(eval_out),
        )
        assert code == 0
        metrics = json.loads((eval_out / "metrics.json").read_text())
        assert 0.0 <= metrics["c_index"] <= 1.0

    def test_manifest_digests_match_inputs(self, tmp_path):
        from pkb.dataio import file_digest

        out = tmp_path / "train"
        assert run_cli(*train_args(out)) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        for path, digest in manifest["inputs"].items():
            assert file_digest(path) == digest

    def test_eval_identity_prediction_gives_zero_mse(self, tmp_path):
        outcome = pd.read_csv(FIXTURES / "outcome_regression.csv", float_precision="round_trip")
        pred = tmp_path / "pred.csv"
        pd.DataFrame({"sample": outcome["sample"], "prediction": outcome["y"]}).to_csv(
            pred, index=False
        )
        out = tmp_path / "eval"
        assert run_cli(
            "eval",
            "--predictions", str(pred),
            "--outcome", str(FIXTURES / "outcome_regression.csv"),
            "--outcome-type", "regression",
            "--out", str(out),
        ) == 0
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["mse"] == 0.0


class TestClassificationPath:
    def test_train_predict_eval_classification(self, tmp_path):
        # binary labels derived from the bundled regression outcome
        outcome = pd.read_csv(FIXTURES / "outcome_regression.csv")
        labels = tmp_path / "labels.csv"
        pd.DataFrame(
            {"sample": outcome["sample"], "label": (outcome["y"] > outcome["y"].median()).astype(int)}
        ).to_csv(labels, index=False)

        train_out = tmp_path / "train"
        args = train_args(train_out, outcome="regression")
        args[args.index("--outcome") + 1] = str(labels)
        args[args.index("--outcome-type") + 1] = "classification"
        assert run_cli(*args) == 0

        predict_out = tmp_path / "predict"
        assert run_cli(
            "predict",
            "--model", str(train_out / "model.json"),
            "--expression", str(FIXTURES / "expression.csv"),
            "--clinical", str(FIXTURES / "clinical.csv"),
            "--out", str(predict_out),
        ) == 0
        predictions = pd.read_csv(predict_out / "predictions.csv")
        assert list(predictions.columns) == ["sample", "score", "probability"]
        assert predictions["probability"].between(0, 1).all()

        eval_out = tmp_path / "eval"
        assert run_cli(
            "eval",
            "--predictions", str(predict_out / "predictions.csv"),
            "--outcome", str(labels),
            "--outcome-type", "classification",
            "--out", str(eval_out),
        ) == 0
        metrics = json.loads((eval_out / "metrics.json").read_text())
        assert 0.0 <= metrics["error_rate"] <= 1.0
        assert metrics["log_loss"] > 0.0

    def test_single_class_outcome_is_data_error(self, tmp_path):
        outcome = pd.read_csv(FIXTURES / "outcome_regression.csv")
        labels = tmp_path / "labels.csv"
        pd.DataFrame({"sample": outcome["sample"], "label": 1}).to_csv(labels, index=False)
        args = train_args(tmp_path / "out", outcome="regression")
        args[args.index("--outcome") + 1] = str(labels)
        args[args.index("--outcome-type") + 1] = "classification"
        assert run_cli(*args) == 3


class TestSimulate:
    def test_simulate_writes_dataset(self, tmp_path):
        out = tmp_path / "sim"
        code = run_cli(
            "simulate",
            "--model", "3",
            "--pathways", "20",
            "--outcome-type", "survival",
            "--n", "60",
            "--seed", "7",
            "--out", str(out),
        )
        assert code == 0
        for name in ("expression.csv", "clinical.csv", "outcome.csv", "pathways.gmt", "truth.json", "manifest.json"):
            assert (out / name).exists()
        truth = json.loads((out / "truth.json").read_text())
        assert truth["informative_pathways"] == [f"PW{m:02d}" for m in range(1, 9)]
        assert len(truth["scores"]) == 60

    def test_simulate_then_train_then_eval(self, tmp_path):
        sim = tmp_path / "sim"
        assert run_cli(
            "simulate", "--model", "3", "--pathways", "20", "--outcome-type", "survival",
            "--n", "60", "--seed", "7", "--out", str(sim),
        ) == 0
        train_out = tmp_path / "train"
        assert run_cli(
            "train",
            "--expression", str(sim / "expression.csv"),
            "--clinical", str(sim / "clinical.csv"),
            "--outcome", str(sim / "outcome.csv"),
            "--pathways", str(sim / "pathways.gmt"),
            "--outcome-type", "survival",
            "--penalty", "l2", "--kernel", "rbf",
            "--max-iter", "20", "--seed", "7",
            "--out", str(train_out),
        ) == 0
        predict_out = tmp_path / "pred"
        assert run_cli(
            "predict", "--model", str(train_out / "model.json"),
            "--expression", str(sim / "expression.csv"),
            "--clinical", str(sim / "clinical.csv"),
            "--out", str(predict_out),
        ) == 0
        assert run_cli(
            "eval", "--predictions", str(predict_out / "predictions.csv"),
            "--outcome", str(sim / "outcome.csv"), "--outcome-type", "survival",
        ) == 0


class TestTune:
    def test_two_point_grid_matches_manual_runs(self, tmp_path):
        out = tmp_path / "tune"
        code = run_cli(
            "tune",
            "--expression", str(FIXTURES / "expression.csv"),
            "--clinical", str(FIXTURES / "clinical.csv"),
            "--outcome", str(FIXTURES / "outcome_regression.csv"),
            "--pathways", str(FIXTURES / "pathways.gmt"),
            "--outcome-type", "regression",
            "--penalty", "l2",
            "--kernels", "rbf",
            "--learning-rates", "0.05",
            "--penalty-multipliers", "0.2,1.0",
            "--max-iter", "30",
            "--seed", "3",
            "--out", str(out),
        )
        assert code == 0
        table = pd.read_csv(out / "tune_results.csv")
        assert len(table) == 2
        best = json.loads((out / "best_config.json").read_text())
        assert best["cv_loss"] == table["cv_loss"].min()

        # manual fits reproduce the two grid cells
        from pkb.boosting import BoostConfig, fit
        from pkb.dataio import ingest, parse_gmt
        from pkb.kernels import KernelSpec

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            dataset, kept, _ = ingest(
                FIXTURES / "expression.csv",
                FIXTURES / "clinical.csv",
                FIXTURES / "outcome_regression.csv",
                parse_gmt(FIXTURES / "pathways.gmt"),
                "regression",
            )
            for mult, row in zip((0.2, 1.0), table.itertuples()):
                model = fit(
                    dataset,
                    kept,
                    BoostConfig(
                        learning_rate=0.05,
                        penalty="l2",
                        penalty_multiplier=mult,
                        kernel=KernelSpec("rbf"),
                        max_iterations=30,
                        seed=3,
                    ),
                )
                assert min(model.cv_losses) == pytest.approx(row.cv_loss, rel=1e-12)


class TestExitCodes:
    def test_unknown_flag_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            run_cli("train", "--no-such-flag", "x")
        assert exc.value.code == 2

    def test_missing_file_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run_cli(*train_args(tmp_path / "out", extra=["--expression", "/nonexistent.csv"]))
        assert exc.value.code == 2

    def test_outcome_type_conflict_is_usage_error(self, tmp_path):
        args = train_args(tmp_path / "out")
        args[args.index("--outcome-type") + 1] = "regression"
        args[args.index("--outcome") + 1] = str(FIXTURES / "outcome_survival.csv")
        assert run_cli(*args) == 2

    def test_corrupt_expression_is_data_error(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("sample,gA\ns1,oops\ns2,1.0\n")
        args = train_args(tmp_path / "out", extra=["--expression", str(bad)])
        assert run_cli(*args) == 3

    def test_subprocess_entry_point(self, tmp_path):
        result = subprocess.run(
            [sys.executable, "-m", "pkb", "--version"],
            capture_output=True,
            text=True,
        )
        assert result.returncode == 0
        assert "pkb" in result.stdout
