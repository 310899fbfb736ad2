"""Pathway kernel boosting.

Second-order functional-descent boosting whose base learners are per-pathway
kernel expansions plus a linear clinical term, with a unified treatment of
regression, binary classification, and Cox survival outcomes.
"""

__version__ = "0.1.0"

from .boosting import (
    BoostConfig,
    FittedModel,
    fit,
    initial_score,
    line_search,
    load_model,
    model_from_dict,
    model_to_dict,
    pathway_weights,
    predict,
    predict_scores,
    save_model,
)
from .data import ExpressionDataset, Outcome, PathwayCollection
from .errors import DataError, NumericError, PKBError, SchemaError
from .kernels import KernelSpec, kernel_matrix, pathway_kernel, poly_kernel, rbf_kernel
from .losses import LossDerivatives, derivatives, empirical_loss
from .metrics import ConcordanceResult, c_index, mse
from .simulate import SimDesign, simulate_dataset
from .solver import IncrementSolution, Penalty, best_increment, recover_gamma, solve_beta, transform

__all__ = [
    "BoostConfig",
    "ConcordanceResult",
    "DataError",
    "ExpressionDataset",
    "FittedModel",
    "IncrementSolution",
    "KernelSpec",
    "LossDerivatives",
    "NumericError",
    "Outcome",
    "PKBError",
    "PathwayCollection",
    "Penalty",
    "SchemaError",
    "SimDesign",
    "best_increment",
    "c_index",
    "derivatives",
    "empirical_loss",
    "fit",
    "initial_score",
    "kernel_matrix",
    "line_search",
    "load_model",
    "model_from_dict",
    "model_to_dict",
    "mse",
    "pathway_kernel",
    "pathway_weights",
    "poly_kernel",
    "predict",
    "predict_scores",
    "rbf_kernel",
    "recover_gamma",
    "save_model",
    "simulate_dataset",
    "solve_beta",
    "transform",
]
