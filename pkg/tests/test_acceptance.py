"""Acceptance suite: every criterion runs at its stated tolerance and prints
one PASS/FAIL line. The simulation criteria share fitted models through
module-scoped fixtures, so run this file as a whole:

    pytest tests/test_acceptance.py -v -s
"""

import itertools
import json
import math
import time
import warnings
from pathlib import Path

import numpy as np
import pytest

from pkb.boosting import BoostConfig, fit, pathway_weights, predict_scores
from pkb.errors import DataError
from pkb.kernels import KernelSpec, kernel_matrix
from pkb.losses import derivatives
from pkb.metrics import c_index, mse
from pkb.simulate import SimDesign, simulate_dataset
from pkb.solver import Penalty, recover_gamma, solve_beta, transform

from test_losses import finite_difference_gradient, finite_difference_hessian, random_outcome
from test_metrics import c_index_oracle

pytestmark = pytest.mark.acceptance

SEEDS = list(range(1000, 1010))
FIXTURES = Path(__file__).parent / "fixtures"

# survival benchmark configurations; penalty multipliers were calibrated once
# on pilot seeds (the survival L2 subproblem sits on a wide plateau well above
# the anchor, unlike regression where the default grid already covers it)
SURVIVAL_BENCH = {
    3: dict(kernel=KernelSpec("rbf"), multiplier=275.0),
    1: dict(kernel=KernelSpec("poly", 3), multiplier=5.0),
}


def say(message):
    # live progress when capture is off (-s); harmless otherwise
    print(message, flush=True)


def report(num, ok, detail):
    import conftest

    line = f"ACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} - {detail}"
    conftest.acceptance_lines.append(line)
    say(line)
    assert ok, f"criterion {num} failed: {detail}"


def split_train_test(dataset, seed):
    perm = np.random.default_rng(seed).permutation(dataset.n_samples)
    n_train = 2 * dataset.n_samples // 3
    return dataset.subset(perm[:n_train]), dataset.subset(perm[n_train:])


# ---------------------------------------------------------------------------
# criterion 1: closed-form derivatives match finite differences
# ---------------------------------------------------------------------------


def test_criterion_1_derivative_correctness():
    started = time.time()
    worst = 0.0
    for kind, seed in (("regression", 41), ("classification", 42), ("survival", 43)):
        rng = np.random.default_rng(seed)
        for _ in range(50):
            n = int(rng.integers(2, 21))
            out = random_outcome(kind, n, rng)
            f = rng.normal(scale=0.8, size=n)
            d = derivatives(out, f)
            fd_grad = finite_difference_gradient(out, f)
            fd_hess = finite_difference_hessian(out, f)
            rel_g = np.abs(d.gradient - fd_grad).max() / np.abs(fd_grad).max()
            rel_h = np.abs(d.hessian_matrix() - fd_hess).max() / np.abs(fd_hess).max()
            worst = max(worst, rel_g, rel_h)
    elapsed = time.time() - started
    report(
        1,
        worst <= 1e-5 and elapsed < 10.0,
        f"150 instances, worst relative error {worst:.2e} (tol 1e-5), {elapsed:.1f}s (limit 10s)",
    )


# ---------------------------------------------------------------------------
# criterion 2: reduction equivalence against direct quadratic programs
# ---------------------------------------------------------------------------


def _random_spd(n, rng):
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    return (q * rng.uniform(0.2, 1.2, size=n)) @ q.T


def _quad_objective(h_mat, z, grad, kernel, beta, gamma, penalty):
    v = kernel @ beta + np.linalg.solve(h_mat, grad)
    if z.shape[1]:
        v = v + z @ gamma
    return 0.5 * float(v @ (h_mat @ v)) + penalty.value(beta)


def _l2_kkt_optimum(h_mat, z, grad, kernel, lam):
    n, q = kernel.shape[0], z.shape[1]
    a = np.column_stack([kernel, z]) if q else kernel
    kkt = a.T @ h_mat @ a
    kkt[:n, :n] += 2.0 * lam * np.eye(n)
    sol = np.linalg.solve(kkt, -a.T @ (h_mat @ np.linalg.solve(h_mat, grad)))
    return sol[:n], sol[n:]


def _l1_fista_optimum(h_mat, z, grad, kernel, lam, max_iters=60_000):
    n, q = kernel.shape[0], z.shape[1]
    a = np.column_stack([kernel, z]) if q else kernel
    aha = a.T @ h_mat @ a
    rhs = a.T @ (h_mat @ np.linalg.solve(h_mat, grad))
    step = 1.0 / np.linalg.eigvalsh(aha).max()

    def objective(x):
        v = a @ x + np.linalg.solve(h_mat, grad)
        return 0.5 * float(v @ (h_mat @ v)) + lam * float(np.abs(x[:n]).sum())

    x = np.zeros(n + q)
    momentum, t_prev = x.copy(), 1.0
    last = objective(x)
    for it in range(1, max_iters + 1):
        g = aha @ momentum + rhs
        x_new = momentum - step * g
        x_new[:n] = np.sign(x_new[:n]) * np.maximum(np.abs(x_new[:n]) - step * lam, 0.0)
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_prev * t_prev))
        momentum = x_new + ((t_prev - 1.0) / t_new) * (x_new - x)
        x, t_prev = x_new, t_new
        if it % 500 == 0:
            now = objective(x)
            if abs(last - now) <= 1e-13 * max(1.0, abs(now)):
                break
            last = now
    return x[:n], x[n:]


def test_criterion_2_reduction_equivalence():
    started = time.time()
    rng = np.random.default_rng(44)
    worst_l2, worst_l1 = 0.0, 0.0
    for _ in range(100):
        n = int(rng.integers(4, 11))
        q = int(rng.integers(0, 4))
        h_mat = _random_spd(n, rng)
        z = rng.normal(size=(n, q))
        grad = 0.5 * rng.normal(size=n)
        x = rng.normal(size=(n, 4))
        kernel = kernel_matrix(x, x, KernelSpec("rbf"))
        lam = float(rng.uniform(0.05, 0.6))

        for kind in ("l2", "l1"):
            penalty = Penalty(kind, lam)
            eta, kt = transform(h_mat, z, grad, kernel)
            beta = solve_beta(eta, kt, penalty)
            gamma = recover_gamma(h_mat, z, kernel, beta, grad)
            mine = _quad_objective(h_mat, z, grad, kernel, beta, gamma, penalty)
            if kind == "l2":
                beta_o, gamma_o = _l2_kkt_optimum(h_mat, z, grad, kernel, lam)
                best = _quad_objective(h_mat, z, grad, kernel, beta_o, gamma_o, penalty)
                worst_l2 = max(worst_l2, abs(mine - best))
            else:
                beta_o, gamma_o = _l1_fista_optimum(h_mat, z, grad, kernel, lam)
                best = _quad_objective(h_mat, z, grad, kernel, beta_o, gamma_o, penalty)
                worst_l1 = max(worst_l1, abs(mine - best))
    elapsed = time.time() - started
    report(
        2,
        worst_l2 <= 1e-8 and worst_l1 <= 1e-6 and elapsed < 30.0,
        f"100 instances: L2 gap {worst_l2:.2e} (tol 1e-8), L1 gap {worst_l1:.2e} (tol 1e-6), "
        f"{elapsed:.1f}s (limit 30s)",
    )


# ---------------------------------------------------------------------------
# criterion 3: concordance index against an independent rule transcription
# ---------------------------------------------------------------------------


def test_criterion_3_c_index_oracle():
    rng = np.random.default_rng(45)
    mismatches = 0
    checked = 0
    for _ in range(200):
        n = int(rng.integers(2, 16))
        times = rng.integers(1, 6, size=n).astype(float)
        events = rng.choice([0.0, 1.0], size=n)
        risks = rng.integers(0, 4, size=n).astype(float)
        expected_total, expected_pairs = c_index_oracle(times, events, risks)
        if expected_pairs == 0:
            with pytest.raises(DataError):
                c_index(times, events, risks)
            continue
        result = c_index(times, events, risks)
        checked += 1
        if (result.concordance, result.permissible_pairs) != (expected_total, expected_pairs):
            mismatches += 1
    # uninformative risks at N = 2000
    n = 2000
    times = rng.uniform(0.1, 10.0, size=n)
    events = rng.choice([0.0, 1.0], size=n, p=[0.2, 0.8])
    uninformative = c_index(times, events, rng.normal(size=n)).c_index
    report(
        3,
        mismatches == 0 and abs(uninformative - 0.5) <= 0.03,
        f"{checked} informative instances, {mismatches} mismatches; "
        f"uninformative C = {uninformative:.3f} (0.5 +/- 0.03)",
    )


# ---------------------------------------------------------------------------
# shared simulation fits for criteria 4-7
# ---------------------------------------------------------------------------

GRID = list(itertools.product(("rbf", "poly3"), (0.01, 0.05), (0.04, 0.2, 1.0)))
KERNELS = {"rbf": KernelSpec("rbf"), "poly3": KernelSpec("poly", 3)}


def _fit_grid_cell(train, pathways, kernel_name, lr, mult, seed):
    config = BoostConfig(
        learning_rate=lr,
        penalty="l2",
        penalty_multiplier=mult,
        kernel=KERNELS[kernel_name],
        max_iterations=1500,
        seed=seed,
    )
    return fit(train, pathways, config)


@pytest.fixture(scope="module")
def model1_regression_runs():
    """Criterion 4 protocol: per seed, tune over the default grid by CV loss."""
    started = time.time()
    runs = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for seed in SEEDS:
            result = simulate_dataset(
                SimDesign(model=1, pathway_count=20, outcome_type="regression", seed=seed)
            )
            train, test = split_train_test(result.dataset, seed)
            best = None
            for kernel_name, lr, mult in GRID:
                model = _fit_grid_cell(train, result.pathways, kernel_name, lr, mult, seed)
                cv = min(model.cv_losses)
                if best is None or cv < best[0]:
                    best = (cv, model)
            model = best[1]
            scores = predict_scores(
                model, test.expression, test.gene_ids, test.clinical, test.clinical_names
            )
            runs.append(
                {
                    "seed": seed,
                    "model": model,
                    "test_mse": mse(test.outcome.y, scores),
                    "train": train,
                    "test": test,
                    "informative": result.informative_pathways,
                }
            )
            say(f"  [crit 4] seed {seed}: test MSE {runs[-1]['test_mse']:.2f}")
    return {"runs": runs, "elapsed": time.time() - started}


@pytest.fixture(scope="module")
def model2_regression_runs():
    """Model 2 fits for the pathway-recovery criterion (fixed best-of-grid
    configuration from the model 1 protocol: poly3, lr 0.05, multiplier 1)."""
    runs = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for seed in SEEDS:
            result = simulate_dataset(
                SimDesign(model=2, pathway_count=20, outcome_type="regression", seed=seed)
            )
            train, _ = split_train_test(result.dataset, seed)
            model = _fit_grid_cell(train, result.pathways, "poly3", 0.05, 1.0, seed)
            runs.append(
                {"seed": seed, "model": model, "informative": result.informative_pathways}
            )
            say(f"  [crit 6] model 2 seed {seed} fitted")
    return {"runs": runs}


def _survival_runs(model_id):
    bench = SURVIVAL_BENCH[model_id]
    started = time.time()
    runs = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for seed in SEEDS:
            result = simulate_dataset(
                SimDesign(model=model_id, pathway_count=20, outcome_type="survival", seed=seed)
            )
            train, test = split_train_test(result.dataset, seed)
            config = BoostConfig(
                learning_rate=0.05,
                penalty="l2",
                penalty_multiplier=bench["multiplier"],
                kernel=bench["kernel"],
                max_iterations=1500,
                seed=seed,
            )
            model = fit(train, result.pathways, config)
            scores = predict_scores(
                model, test.expression, test.gene_ids, test.clinical, test.clinical_names
            )
            ci = c_index(test.outcome.time, test.outcome.event, np.exp(scores)).c_index
            runs.append(
                {
                    "seed": seed,
                    "model": model,
                    "c_index": ci,
                    "informative": result.informative_pathways,
                }
            )
            say(f"  [crit 5] model {model_id} seed {seed}: C {ci:.3f}")
    return {"runs": runs, "elapsed": time.time() - started}


@pytest.fixture(scope="module")
def model3_survival_runs():
    return _survival_runs(3)


@pytest.fixture(scope="module")
def model1_survival_runs():
    return _survival_runs(1)


# ---------------------------------------------------------------------------
# criterion 4: regression reproduction with a ridge baseline
# ---------------------------------------------------------------------------


def test_criterion_4_regression_reproduction(model1_regression_runs):
    from sklearn.linear_model import RidgeCV

    started = time.time()
    runs = model1_regression_runs["runs"]
    mses = [r["test_mse"] for r in runs]
    margins = []
    for r in runs:
        train, test = r["train"], r["test"]
        x_train = np.column_stack([train.expression, train.clinical])
        x_test = np.column_stack([test.expression, test.clinical])
        ridge = RidgeCV(alphas=np.logspace(-1, 3, 100)).fit(x_train, train.outcome.y)
        ridge_mse = mse(test.outcome.y, ridge.predict(x_test))
        margins.append(1.0 - r["test_mse"] / ridge_mse)
    mean_mse = float(np.mean(mses))
    elapsed = model1_regression_runs["elapsed"] + time.time() - started
    ok = 12.0 <= mean_mse <= 24.0 and all(m >= 0.40 for m in margins) and elapsed < 1800.0
    report(
        4,
        ok,
        f"mean test MSE {mean_mse:.2f} (band [12, 24]); "
        f"ridge margin per run min {min(margins):.0%} (need >= 40%); "
        f"{elapsed:.0f}s (limit 1800s)",
    )


# ---------------------------------------------------------------------------
# criterion 5: survival reproduction
# ---------------------------------------------------------------------------


def test_criterion_5_survival_reproduction(model3_survival_runs, model1_survival_runs):
    mean3 = float(np.mean([r["c_index"] for r in model3_survival_runs["runs"]]))
    mean1 = float(np.mean([r["c_index"] for r in model1_survival_runs["runs"]]))
    elapsed = model3_survival_runs["elapsed"] + model1_survival_runs["elapsed"]
    report(
        5,
        mean3 >= 0.85 and mean1 >= 0.85 and elapsed < 2700.0,
        f"model 3 mean C {mean3:.3f}, model 1 mean C {mean1:.3f} (both need >= 0.85); "
        f"{elapsed:.0f}s (limit 2700s)",
    )


# ---------------------------------------------------------------------------
# criterion 6: informative pathways occupy the top weight ranks
# ---------------------------------------------------------------------------


def _recovery_count(runs):
    hits = 0
    for r in runs:
        weights = pathway_weights(r["model"])
        k = len(r["informative"])
        top = sorted(weights, key=weights.get, reverse=True)[:k]
        hits += set(top) == set(r["informative"])
    return hits


def test_criterion_6_pathway_recovery(
    model3_survival_runs, model1_regression_runs, model2_regression_runs
):
    hits3 = _recovery_count(model3_survival_runs["runs"])
    hits1 = _recovery_count(model1_regression_runs["runs"])
    hits2 = _recovery_count(model2_regression_runs["runs"])
    report(
        6,
        hits3 >= 8 and hits1 >= 8 and hits2 >= 8,
        f"top-k recovery: model 3 survival {hits3}/10, model 1 regression {hits1}/10, "
        f"model 2 regression {hits2}/10 (each needs >= 8)",
    )


# ---------------------------------------------------------------------------
# criterion 7: training loss is non-increasing in every fitted model
# ---------------------------------------------------------------------------


def test_criterion_7_monotone_training_loss(
    model1_regression_runs, model2_regression_runs, model3_survival_runs, model1_survival_runs
):
    worst = -np.inf
    n_models = 0
    for block in (
        model1_regression_runs,
        model2_regression_runs,
        model3_survival_runs,
        model1_survival_runs,
    ):
        for r in block["runs"]:
            losses = r["model"].trace["train_loss"]
            n_models += 1
            for a, b in zip(losses, losses[1:]):
                worst = max(worst, b - a)
    report(
        7,
        worst <= 1e-12,
        f"{n_models} fitted models, largest per-iteration loss increase {worst:.2e} "
        f"(slack 1e-12)",
    )


# ---------------------------------------------------------------------------
# criterion 8: end-to-end CLI smoke on the bundled 50-sample fixtures
# ---------------------------------------------------------------------------


def test_criterion_8_cli_smoke(tmp_path):
    from pkb.cli import main

    started = time.time()
    train_out = tmp_path / "train"
    predict_out = tmp_path / "predict"
    eval_out = tmp_path / "eval"
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rc_train = main(
            [
                "train",
                "--expression", str(FIXTURES / "expression.csv"),
                "--clinical", str(FIXTURES / "clinical.csv"),
                "--outcome", str(FIXTURES / "outcome_survival.csv"),
                "--pathways", str(FIXTURES / "pathways.gmt"),
                "--outcome-type", "survival",
                "--penalty", "l2",
                "--kernel", "rbf",
                "--max-iter", "40",
                "--seed", "11",
                "--out", str(train_out),
            ]
        )
        rc_predict = main(
            [
                "predict",
                "--model", str(train_out / "model.json"),
                "--expression", str(FIXTURES / "expression.csv"),
                "--clinical", str(FIXTURES / "clinical.csv"),
                "--out", str(predict_out),
            ]
        )
        rc_eval = main(
            [
                "eval",
                "--predictions", str(predict_out / "predictions.csv"),
                "--outcome", str(FIXTURES / "outcome_survival.csv"),
                "--outcome-type", "survival",
                "--out", str(eval_out),
            ]
        )
    elapsed = time.time() - started
    metrics = json.loads((eval_out / "metrics.json").read_text()) if rc_eval == 0 else {}
    ok = rc_train == rc_predict == rc_eval == 0 and "c_index" in metrics and elapsed < 60.0
    report(
        8,
        ok,
        f"train/predict/eval exit codes ({rc_train},{rc_predict},{rc_eval}), "
        f"C-index {metrics.get('c_index', float('nan')):.3f}, {elapsed:.1f}s (limit 60s)",
    )
