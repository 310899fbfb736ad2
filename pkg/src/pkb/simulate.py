"""Synthetic benchmark datasets: three score models, Gaussian-noise regression
outcomes, and Weibull survival outcomes with uniform censoring.

Covariates are standard-normal gene expressions grouped into equally sized
pathways, plus five clinical features (two Bernoulli(0.5) coded {0,1}, three
standard normal). Models 1 and 2 draw signal from the first three pathways,
model 3 from the first eight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import ExpressionDataset, Outcome, PathwayCollection
from .errors import DataError

INFORMATIVE_PATHWAYS = {1: 3, 2: 3, 3: 8}


@dataclass(frozen=True)
class SimDesign:
    """Design constants for one simulated dataset; defaults follow the
    benchmark layout (300 samples, 5 genes per pathway, 20% censoring,
    20-month target median survival, exponential baseline hazard)."""

    model: int = 1
    pathway_count: int = 20
    genes_per_pathway: int = 5
    sample_size: int = 300
    outcome_type: str = "regression"
    censor_fraction: float = 0.20
    target_median: float = 20.0
    shape: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.model not in (1, 2, 3):
            raise DataError("model must be 1, 2, or 3")
        if self.pathway_count < INFORMATIVE_PATHWAYS[self.model]:
            raise DataError(
                f"model {self.model} needs at least "
                f"{INFORMATIVE_PATHWAYS[self.model]} pathways"
            )
        if self.genes_per_pathway < 2:
            raise DataError("need at least 2 genes per pathway")
        if self.outcome_type not in ("regression", "survival"):
            raise DataError("simulated outcomes are regression or survival")
        if not 0.0 <= self.censor_fraction < 1.0:
            raise DataError("censor fraction must lie in [0, 1)")
        if not (self.shape > 0 and self.target_median > 0):
            raise DataError("Weibull shape and target median must be positive")

    @property
    def informative_pathways(self) -> list[str]:
        return [pathway_name(m) for m in range(1, INFORMATIVE_PATHWAYS[self.model] + 1)]


def pathway_name(m: int) -> str:
    return f"PW{m:02d}"


def gene_name(m: int, k: int) -> str:
    return f"{pathway_name(m)}_G{k}"


def pathway_collection(design: SimDesign) -> PathwayCollection:
    return PathwayCollection(
        [
            (pathway_name(m), [gene_name(m, k) for k in range(1, design.genes_per_pathway + 1)])
            for m in range(1, design.pathway_count + 1)
        ]
    )


CLINICAL_NAMES = ["z1", "z2", "z3", "z4", "z5"]


def gen_covariates(design: SimDesign, rng: np.random.Generator):
    """Expression matrix (N x 5M, iid standard normal) and clinical matrix
    (z1, z2 ~ Bernoulli(0.5) in {0,1}; z3..z5 ~ N(0,1))."""
    n = design.sample_size
    p = design.pathway_count * design.genes_per_pathway
    expression = rng.standard_normal((n, p))
    binary = rng.binomial(1, 0.5, size=(n, 2)).astype(float)
    continuous = rng.standard_normal((n, 3))
    clinical = np.column_stack([binary, continuous])
    gene_ids = [
        gene_name(m, k)
        for m in range(1, design.pathway_count + 1)
        for k in range(1, design.genes_per_pathway + 1)
    ]
    return expression, gene_ids, clinical, list(CLINICAL_NAMES)


def score_function(model: int, x, z, genes_per_pathway: int = 5) -> float | np.ndarray:
    """True score F(x, z) for one sample (1-d inputs) or a batch (2-d).

    Model 2 contains log|x1^3 - x2^3|, which diverges on the null set where
    the two cubes coincide; continuous inputs avoid it almost surely.
    """
    x2d = np.atleast_2d(np.asarray(x, dtype=float))
    z2d = np.atleast_2d(np.asarray(z, dtype=float))
    g = genes_per_pathway

    def gene(m, k):  # expression of gene k (1-based) in pathway m (1-based)
        return x2d[:, (m - 1) * g + (k - 1)]

    if model == 1:
        f = (
            3.0 * z2d[:, 0]
            - 4.0 * z2d[:, 1]
            + 3.0 * z2d[:, 2]
            + 2.0 * gene(1, 1)
            + 3.0 * gene(1, 2)
            + 3.0 * np.exp(0.5 * gene(2, 1) + 0.5 * gene(2, 2))
            + 4.0 * gene(3, 1) * gene(3, 2)
        )
    elif model == 2:
        f = (
            z2d[:, 0]
            - 3.0 * z2d[:, 1]
            + 3.0 * z2d[:, 2]
            - z2d[:, 3]
            + 6.0 * np.sin(0.5 * gene(1, 1) + 0.5 * gene(1, 2))
            + 2.0 * np.log(np.abs(gene(2, 1) ** 3 - gene(2, 2) ** 3))
            + 2.0 * (gene(3, 1) ** 2 - gene(3, 2) ** 2)
        )
    elif model == 3:
        norms = np.zeros(x2d.shape[0])
        for m in range(1, 9):
            block = x2d[:, (m - 1) * g : m * g]
            norms += np.sqrt(np.einsum("ij,ij->i", block, block))
        f = z2d[:, 0] + z2d[:, 2] + 2.0 * norms
    else:
        raise DataError("model must be 1, 2, or 3")
    return f if np.asarray(x).ndim == 2 else float(f[0])


def gen_regression_outcome(f, rng: np.random.Generator) -> np.ndarray:
    """Add Gaussian noise with variance one fifth of the score variance."""
    f = np.asarray(f, dtype=float)
    var = float(np.var(f))
    if not var > 0:
        raise DataError("score vector is constant; noise variance is undefined")
    return f + rng.normal(0.0, math.sqrt(var / 5.0), size=f.shape)


def survival_time_from_uniform(u, f, kappa: float, rho: float) -> np.ndarray:
    """Invert the Weibull cumulative hazard: t = (-log(u) / (kappa e^F))^(1/rho)."""
    u = np.asarray(u, dtype=float)
    f = np.asarray(f, dtype=float)
    return (-np.log(u) / (kappa * np.exp(f))) ** (1.0 / rho)


def gen_survival_outcome(
    f, kappa: float, rho: float, censor_fraction: float, rng: np.random.Generator
):
    """Survival times by inverse-transform sampling; a seeded fraction of the
    samples is censored uniformly on (0, t)."""
    f = np.asarray(f, dtype=float)
    if not (kappa > 0 and rho > 0):
        raise DataError("Weibull parameters must be positive")
    n = f.size
    u = rng.uniform(size=n)
    times = survival_time_from_uniform(u, f, kappa, rho)
    event = np.ones(n)
    n_censor = int(round(censor_fraction * n))
    if n_censor:
        censored = rng.choice(n, size=n_censor, replace=False)
        times = times.copy()
        times[censored] = rng.uniform(0.0, times[censored])
        event[censored] = 0.0
    return times, event


def calibrate_weibull(f, target_median: float, rho: float) -> float:
    """Scale parameter kappa for which the median over samples of the
    per-sample median survival time, median_i (log 2 / (kappa e^{F_i}))^{1/rho},
    equals the target; solved by bisection to 1e-8 relative."""
    f = np.asarray(f, dtype=float)
    if not (rho > 0 and target_median > 0):
        raise DataError("rho and target median must be positive")

    def median_at(kappa):
        return float(np.median((math.log(2.0) / (kappa * np.exp(f))) ** (1.0 / rho)))

    guess = math.log(2.0) * math.exp(-float(np.median(f))) / target_median**rho
    lo, hi = guess / 4.0, guess * 4.0
    # median_at is strictly decreasing in kappa; expand until it brackets
    while median_at(lo) < target_median:
        lo /= 2.0
    while median_at(hi) > target_median:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if median_at(mid) > target_median:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-8 * hi:
            break
    return 0.5 * (lo + hi)


@dataclass
class SimResult:
    """Simulated dataset plus the generating truth."""

    dataset: ExpressionDataset
    pathways: PathwayCollection
    scores: np.ndarray
    informative_pathways: list[str]
    weibull_scale: float | None = None


def simulate_dataset(design: SimDesign) -> SimResult:
    """Generate one full dataset from a seeded stream."""
    rng = np.random.default_rng(design.seed)
    expression, gene_ids, clinical, clinical_names = gen_covariates(design, rng)
    f = score_function(design.model, expression, clinical, design.genes_per_pathway)
    kappa = None
    if design.outcome_type == "regression":
        outcome = Outcome.regression(gen_regression_outcome(f, rng))
    else:
        kappa = calibrate_weibull(f, design.target_median, design.shape)
        times, event = gen_survival_outcome(f, kappa, design.shape, design.censor_fraction, rng)
        outcome = Outcome.survival(times, event)
    sample_ids = [f"S{i + 1:04d}" for i in range(design.sample_size)]
    dataset = ExpressionDataset(
        expression=expression,
        gene_ids=gene_ids,
        clinical=clinical,
        clinical_names=clinical_names,
        sample_ids=sample_ids,
        outcome=outcome,
    )
    return SimResult(
        dataset=dataset,
        pathways=pathway_collection(design),
        scores=np.asarray(f, dtype=float),
        informative_pathways=design.informative_pathways,
        weibull_scale=kappa,
    )
