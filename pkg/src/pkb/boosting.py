"""Boosting engine: initialization, iteration loop, CV-chosen depth, prediction.

The fit runs three cross-validation boosting processes in lockstep to choose
the iteration count, then refits on the full data. Each iteration picks the
pathway whose regularized second-order subproblem attains the lowest value,
line-searches the step, and shrinks it by the learning rate.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .data import CLASSIFICATION, REGRESSION, SURVIVAL, ExpressionDataset, Outcome, PathwayCollection
from .errors import DataError, NumericError, SchemaError
from .kernels import KernelSpec, kernel_matrix, pathway_kernel
from .losses import derivatives, empirical_loss
from .solver import IncrementSolver, Penalty, auto_lambda

MODEL_FORMAT = "pkb-model/1"
LINE_SEARCH_MAX = 100.0
LINE_SEARCH_TOL = 1e-6
# cosine threshold for dropping a clinical column as collinear: partial
# correlation with the span of earlier columns above 1 - 1e-10
_COLLINEAR_SIN = math.sqrt(2e-10)
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def _thread_count() -> int:
    try:
        return max(1, int(os.environ.get("PKB_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class BoostConfig:
    """Fit-time configuration.

    ``penalty_multiplier`` scales a data-driven penalty anchor computed at
    iteration zero; the concrete level is recorded on the fitted model.
    """

    learning_rate: float = 0.05
    penalty: str = "l2"
    penalty_multiplier: float = 1.0
    kernel: KernelSpec = field(default_factory=KernelSpec)
    max_iterations: int = 1500
    cv_patience: int = 50
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.learning_rate < 1.0:
            raise DataError("learning rate must lie in (0, 1)")
        if self.penalty not in ("l1", "l2"):
            raise DataError(f"unknown penalty {self.penalty!r}")
        if not self.penalty_multiplier > 0:
            raise DataError("penalty multiplier must be positive")
        if self.max_iterations < 1:
            raise DataError("max_iterations must be a positive integer")
        if self.cv_patience < 1:
            raise DataError("cv_patience must be >= 1")


@dataclass(frozen=True)
class ClinicalSpec:
    """Retained clinical columns with their training standardization."""

    columns: tuple[str, ...]
    means: np.ndarray
    sds: np.ndarray

    def apply(self, clinical, names) -> np.ndarray:
        """Standardize new clinical data to the training scale, by column name."""
        if not self.columns:
            return np.zeros((np.atleast_2d(np.asarray(clinical, dtype=float)).shape[0], 0))
        clinical = np.atleast_2d(np.asarray(clinical, dtype=float))
        lookup = {name: i for i, name in enumerate(names)}
        missing = [c for c in self.columns if c not in lookup]
        if missing:
            raise SchemaError(f"clinical data is missing columns: {missing[:5]}")
        cols = [lookup[c] for c in self.columns]
        return (clinical[:, cols] - self.means) / self.sds


def prepare_clinical(clinical, names) -> tuple[np.ndarray, ClinicalSpec]:
    """Standardize clinical columns and drop the unusable ones.

    Constant columns and columns nearly inside the span of earlier columns
    are dropped with a warning, keeping Z'HZ invertible downstream. No
    intercept is added; the constant F0 carries it.
    """
    clinical = np.atleast_2d(np.asarray(clinical, dtype=float))
    n = clinical.shape[0]
    if clinical.shape[1] != len(names):
        raise DataError("clinical matrix does not match its column names")
    kept_cols, kept_names, means, sds = [], [], [], []
    basis = np.zeros((n, 0))
    for j, name in enumerate(names):
        col = clinical[:, j]
        if not np.all(np.isfinite(col)):
            raise DataError(f"clinical column {name!r} contains non-finite values")
        mean = float(col.mean())
        sd = float(col.std())
        if sd == 0.0:
            warnings.warn(f"clinical column {name!r} is constant and was dropped")
            continue
        std_col = (col - mean) / sd
        resid = std_col - basis @ (basis.T @ std_col)
        resid_norm = float(np.linalg.norm(resid))
        if resid_norm < _COLLINEAR_SIN * float(np.linalg.norm(std_col)):
            warnings.warn(f"clinical column {name!r} is collinear with earlier columns; dropped")
            continue
        basis = np.column_stack([basis, resid / resid_norm])
        kept_cols.append(std_col)
        kept_names.append(name)
        means.append(mean)
        sds.append(sd)
    z = np.column_stack(kept_cols) if kept_cols else np.zeros((n, 0))
    spec = ClinicalSpec(tuple(kept_names), np.array(means), np.array(sds))
    return z, spec


def initial_score(outcome: Outcome) -> float:
    """Constant minimizing the empirical loss; zero for survival, where the
    partial likelihood ignores constants."""
    if outcome.kind == REGRESSION:
        return float(outcome.y.mean())
    if outcome.kind == SURVIVAL:
        return 0.0
    n_pos = int(np.count_nonzero(outcome.y == 1.0))
    n_neg = outcome.n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("classification outcome contains a single class")
    return math.log(n_pos / n_neg)


def line_search(outcome: Outcome, f, increment, d_max: float = LINE_SEARCH_MAX) -> float:
    """Step length approximately minimizing the loss along ``increment``.

    Regression uses the exact quadratic minimizer; the other losses use
    golden-section search on [0, d_max]. The returned step never increases
    the loss.
    """
    f = np.asarray(f, dtype=float)
    increment = np.asarray(increment, dtype=float)
    if not np.all(np.isfinite(increment)):
        raise NumericError("increment contains non-finite values")
    norm_sq = float(increment @ increment)
    if norm_sq == 0.0:
        return 0.0
    if outcome.kind == REGRESSION:
        d = float(increment @ (outcome.y - f)) / norm_sq
        return min(max(d, 0.0), d_max)

    def loss_at(d):
        return empirical_loss(outcome, f + d * increment)

    a, b = 0.0, d_max
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = loss_at(c), loss_at(d)
    while b - a > LINE_SEARCH_TOL:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = loss_at(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = loss_at(d)
    best = 0.5 * (a + b)
    return best if loss_at(best) <= loss_at(0.0) else 0.0


def cv_fold_assignment(outcome: Outcome, n_folds: int, seed: int) -> np.ndarray:
    """Seeded fold labels, stratified by class or by event indicator."""
    rng = np.random.default_rng(seed)
    n = outcome.n
    folds = np.empty(n, dtype=int)
    if outcome.kind == CLASSIFICATION:
        strata = [np.flatnonzero(outcome.y == 1.0), np.flatnonzero(outcome.y == -1.0)]
    elif outcome.kind == SURVIVAL:
        strata = [np.flatnonzero(outcome.event == 1.0), np.flatnonzero(outcome.event == 0.0)]
    else:
        strata = [np.arange(n)]
    for stratum in strata:
        if stratum.size == 0:
            continue
        shuffled = rng.permutation(stratum)
        folds[shuffled] = np.arange(stratum.size) % n_folds
    return folds


class _BoostProcess:
    """One boosting run: either a CV fold (with held-out tracking) or the
    final full-data refit (with trace recording)."""

    def __init__(
        self,
        outcome: Outcome,
        z: np.ndarray,
        kernels: list[np.ndarray],
        penalty: Penalty,
        learning_rate: float,
        valid_outcome: Outcome | None = None,
        valid_z: np.ndarray | None = None,
        cross_kernels: list[np.ndarray] | None = None,
        record_trace: bool = False,
    ):
        self.outcome = outcome
        self.z = z
        self.kernels = kernels
        self.nu = learning_rate
        self.f0 = initial_score(outcome)
        self.f = np.full(outcome.n, self.f0)
        self.solver = IncrementSolver(z, kernels, penalty, static=outcome.kind == REGRESSION)
        self.beta_accum = {m: np.zeros(outcome.n) for m in range(len(kernels))}
        self.gamma_accum = np.zeros(z.shape[1])
        self.valid_outcome = valid_outcome
        self.valid_z = valid_z
        self.cross_kernels = cross_kernels
        if valid_outcome is not None:
            self.f_valid = np.full(valid_outcome.n, self.f0)
        self.trace = {"pathway": [], "step": [], "train_loss": []} if record_trace else None

    def step(self) -> None:
        derivs = derivatives(self.outcome, self.f)
        inc = self.solver.best_increment(derivs)
        f_inc = self.kernels[inc.pathway_index] @ inc.beta
        if self.z.shape[1]:
            f_inc = f_inc + self.z @ inc.gamma
        d = line_search(self.outcome, self.f, f_inc)
        scale = self.nu * d
        self.f = self.f + scale * f_inc
        self.beta_accum[inc.pathway_index] += scale * inc.beta
        if self.gamma_accum.size:
            self.gamma_accum += scale * inc.gamma
        if self.valid_outcome is not None:
            f_inc_valid = self.cross_kernels[inc.pathway_index] @ inc.beta
            if self.valid_z.shape[1]:
                f_inc_valid = f_inc_valid + self.valid_z @ inc.gamma
            self.f_valid = self.f_valid + scale * f_inc_valid
        if self.trace is not None:
            self.trace["pathway"].append(inc.pathway_index)
            self.trace["step"].append(float(d))
            self.trace["train_loss"].append(empirical_loss(self.outcome, self.f))

    def valid_loss(self) -> float:
        return empirical_loss(self.valid_outcome, self.f_valid)


@dataclass
class FittedModel:
    """Fitted boosting model: constant score, accumulated per-pathway dual
    coefficients, clinical coefficients, and everything needed to evaluate
    the kernels on new samples."""

    outcome_type: str
    config: BoostConfig
    lam: float
    f0: float
    gamma: np.ndarray
    clinical: ClinicalSpec
    pathway_names: list[str]
    pathway_genes: dict[str, list[str]]
    beta: dict[str, np.ndarray]
    training_expression: dict[str, np.ndarray]
    training_sample_ids: list[str]
    t_selected: int
    trace: dict[str, list]
    cv_losses: list[float]


def fit(
    dataset: ExpressionDataset,
    pathways: PathwayCollection,
    config: BoostConfig,
    folds: np.ndarray | None = None,
) -> FittedModel:
    """Fit the boosting model, choosing the iteration count by 3-fold CV.

    ``folds`` overrides the seeded stratified fold assignment (mainly for
    reproducibility tests); entries must lie in {0, 1, 2}.
    """
    outcome = dataset.outcome
    n = dataset.n_samples
    if n < 10:
        raise DataError(f"need at least 10 samples to fit, got {n}")
    if outcome.kind == SURVIVAL and outcome.event.sum() < 1:
        raise DataError("survival fit needs at least one observed event")
    restricted = pathways.restrict_to(dataset.gene_ids, min_genes=1)
    if len(restricted) == 0:
        raise DataError("no pathway has genes present in the expression data")

    z, clin_spec = prepare_clinical(dataset.clinical, dataset.clinical_names)
    names = restricted.names
    columns = restricted.column_indices(dataset.gene_ids)
    spec = config.kernel
    kernels = []
    for name in names:
        sub = np.ascontiguousarray(dataset.expression[:, columns[name]])
        w = spec.weights_for(restricted.genes(name))
        if not w.sum() > 0:
            raise DataError(f"pathway {name!r}: gene weights sum to zero")
        kernels.append(kernel_matrix(sub, sub, spec, w))

    lam = config.penalty_multiplier * auto_lambda(
        derivatives(outcome, np.full(n, initial_score(outcome))), z, kernels
    )
    penalty = Penalty(config.penalty, lam)

    if folds is None:
        folds = cv_fold_assignment(outcome, 3, config.seed)
    else:
        folds = np.asarray(folds, dtype=int)
        if folds.shape != (n,) or not np.all(np.isin(folds, (0, 1, 2))):
            raise DataError("fold assignment must give each sample a fold in {0, 1, 2}")

    runs = []
    for k in range(3):
        train = np.flatnonzero(folds != k)
        valid = np.flatnonzero(folds == k)
        if train.size == 0 or valid.size == 0:
            raise DataError("a cross-validation fold is empty; too few samples")
        runs.append(
            _BoostProcess(
                outcome.subset(train),
                z[train],
                [k_m[np.ix_(train, train)] for k_m in kernels],
                penalty,
                config.learning_rate,
                valid_outcome=outcome.subset(valid),
                valid_z=z[valid],
                cross_kernels=[k_m[np.ix_(valid, train)] for k_m in kernels],
            )
        )

    cv_losses = [float(np.mean([r.valid_loss() for r in runs]))]
    best_loss, best_t = cv_losses[0], 0
    t = 0
    workers = min(_thread_count(), len(runs))
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while t < config.max_iterations:
            if pool is not None:
                list(pool.map(lambda r: r.step(), runs))
            else:
                for r in runs:
                    r.step()
            t += 1
            avg = float(np.mean([r.valid_loss() for r in runs]))
            cv_losses.append(avg)
            if avg < best_loss:
                best_loss, best_t = avg, t
            if t - best_t >= config.cv_patience:
                break
    finally:
        if pool is not None:
            pool.shutdown()

    t_selected = best_t
    if t_selected == 0:
        warnings.warn("cross-validation selected zero iterations; model is the constant F0")

    final = _BoostProcess(outcome, z, kernels, penalty, config.learning_rate, record_trace=True)
    for _ in range(t_selected):
        final.step()
    final.trace["pathway"] = [names[m] for m in final.trace["pathway"]]
    final.trace["cv_loss"] = cv_losses[1 : t_selected + 1]
    final.trace["final_train_scores"] = final.f.tolist()

    beta, genes, train_expr = {}, {}, {}
    for m, acc in final.beta_accum.items():
        if np.any(acc != 0.0):
            name = names[m]
            beta[name] = acc
            genes[name] = list(restricted.genes(name))
            train_expr[name] = np.ascontiguousarray(dataset.expression[:, columns[name]])

    return FittedModel(
        outcome_type=outcome.kind,
        config=config,
        lam=lam,
        f0=final.f0,
        gamma=final.gamma_accum,
        clinical=clin_spec,
        pathway_names=names,
        pathway_genes=genes,
        beta=beta,
        training_expression=train_expr,
        training_sample_ids=list(dataset.sample_ids),
        t_selected=t_selected,
        trace=final.trace,
        cv_losses=cv_losses,
    )


def predict_scores(model: FittedModel, expression, gene_ids, clinical=None, clinical_names=None) -> np.ndarray:
    """Raw score F(x, z) on new samples."""
    expression = np.atleast_2d(np.asarray(expression, dtype=float))
    f = np.full(expression.shape[0], model.f0)
    for name, beta in model.beta.items():
        genes = model.pathway_genes[name]
        k = pathway_kernel(
            expression, gene_ids, model.training_expression[name], genes, genes, model.config.kernel
        )
        f = f + k @ beta
    if model.clinical.columns:
        if clinical is None or clinical_names is None:
            raise SchemaError("model uses clinical features; clinical data is required")
        f = f + model.clinical.apply(clinical, clinical_names) @ model.gamma
    return f


def predict(model: FittedModel, expression, gene_ids, clinical=None, clinical_names=None) -> np.ndarray:
    """Outcome-scale prediction: the score itself for regression, P(y=+1)
    for classification, and the relative risk exp(F) for survival."""
    scores = predict_scores(model, expression, gene_ids, clinical, clinical_names)
    if model.outcome_type == CLASSIFICATION:
        return expit(scores)
    if model.outcome_type == SURVIVAL:
        return np.exp(scores)
    return scores


def pathway_weights(model: FittedModel) -> dict[str, float]:
    """L2 norm of each pathway's accumulated dual coefficients; zero for
    pathways never selected."""
    return {
        name: float(np.linalg.norm(model.beta[name])) if name in model.beta else 0.0
        for name in model.pathway_names
    }


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def model_to_dict(model: FittedModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "outcome_type": model.outcome_type,
        "config": {
            "learning_rate": model.config.learning_rate,
            "penalty": model.config.penalty,
            "penalty_multiplier": model.config.penalty_multiplier,
            "kernel": {
                "kind": model.config.kernel.kind,
                "degree": model.config.kernel.degree,
                "gene_weights": model.config.kernel.gene_weights,
            },
            "max_iterations": model.config.max_iterations,
            "cv_patience": model.config.cv_patience,
            "seed": model.config.seed,
        },
        "lam": model.lam,
        "f0": model.f0,
        "gamma": model.gamma.tolist(),
        "clinical": {
            "columns": list(model.clinical.columns),
            "means": model.clinical.means.tolist(),
            "sds": model.clinical.sds.tolist(),
        },
        "pathway_names": model.pathway_names,
        "pathways": {
            name: {
                "genes": model.pathway_genes[name],
                "beta": model.beta[name].tolist(),
                "training_expression": model.training_expression[name].tolist(),
            }
            for name in model.beta
        },
        "training_sample_ids": model.training_sample_ids,
        "t_selected": model.t_selected,
        "trace": model.trace,
        "cv_losses": model.cv_losses,
    }


def model_from_dict(doc: dict) -> FittedModel:
    if doc.get("format") != MODEL_FORMAT:
        raise SchemaError(f"not a recognized model document: format={doc.get('format')!r}")
    cfg = doc["config"]
    kernel = KernelSpec(
        kind=cfg["kernel"]["kind"],
        degree=cfg["kernel"]["degree"],
        gene_weights=cfg["kernel"]["gene_weights"],
    )
    config = BoostConfig(
        learning_rate=cfg["learning_rate"],
        penalty=cfg["penalty"],
        penalty_multiplier=cfg["penalty_multiplier"],
        kernel=kernel,
        max_iterations=cfg["max_iterations"],
        cv_patience=cfg["cv_patience"],
        seed=cfg["seed"],
    )
    pathways = doc["pathways"]
    return FittedModel(
        outcome_type=doc["outcome_type"],
        config=config,
        lam=doc["lam"],
        f0=doc["f0"],
        gamma=np.asarray(doc["gamma"], dtype=float),
        clinical=ClinicalSpec(
            tuple(doc["clinical"]["columns"]),
            np.asarray(doc["clinical"]["means"], dtype=float),
            np.asarray(doc["clinical"]["sds"], dtype=float),
        ),
        pathway_names=list(doc["pathway_names"]),
        pathway_genes={name: list(p["genes"]) for name, p in pathways.items()},
        beta={name: np.asarray(p["beta"], dtype=float) for name, p in pathways.items()},
        training_expression={
            name: np.asarray(p["training_expression"], dtype=float) for name, p in pathways.items()
        },
        training_sample_ids=list(doc["training_sample_ids"]),
        t_selected=doc["t_selected"],
        trace=doc["trace"],
        cv_losses=list(doc["cv_losses"]),
    )


def save_model(model: FittedModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh)


def load_model(path) -> FittedModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
