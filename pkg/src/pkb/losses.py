"""Loss functions with closed-form gradients and Hessians for boosting.

Every quantity is a per-sample mean: the loss, its gradient, and its Hessian
all carry a 1/N factor, so they stay mutually consistent under
finite-difference checks regardless of outcome type.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .data import CLASSIFICATION, REGRESSION, Outcome
from .errors import DataError, NumericError


@dataclass
class LossDerivatives:
    """Gradient and Hessian of the empirical loss at a score vector.

    ``hessian`` is a 1-d array when the Hessian is diagonal (regression,
    classification) and a 2-d dense symmetric matrix for the survival loss,
    where risk sets couple the samples.
    """

    gradient: np.ndarray
    hessian: np.ndarray

    @property
    def is_diagonal(self) -> bool:
        return self.hessian.ndim == 1

    def hessian_matrix(self) -> np.ndarray:
        return np.diag(self.hessian) if self.is_diagonal else self.hessian


def _checked_scores(outcome: Outcome, f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (outcome.n,):
        raise DataError(f"score vector has shape {f.shape}, expected ({outcome.n},)")
    if not np.all(np.isfinite(f)):
        raise NumericError("score vector contains non-finite values")
    return f


def empirical_loss(outcome: Outcome, f) -> float:
    """Mean loss over samples: squared error, log loss, or negative log
    partial likelihood depending on the outcome type."""
    f = _checked_scores(outcome, f)
    if outcome.kind == REGRESSION:
        return float(np.mean((outcome.y - f) ** 2))
    if outcome.kind == CLASSIFICATION:
        return float(np.mean(np.logaddexp(0.0, -outcome.y * f)))
    time, event = outcome.time, outcome.event
    if event.sum() == 0:
        raise DataError("survival loss is undefined when every sample is censored")
    log_risk = _log_risk_set_sums(time, f)
    return float(-np.mean(event * (f - log_risk)))


def derivatives(outcome: Outcome, f) -> LossDerivatives:
    """Gradient and Hessian of :func:`empirical_loss` at ``f``."""
    f = _checked_scores(outcome, f)
    n = outcome.n
    if outcome.kind == REGRESSION:
        grad = -2.0 * (outcome.y - f) / n
        return LossDerivatives(grad, np.full(n, 2.0 / n))
    if outcome.kind == CLASSIFICATION:
        y = outcome.y
        p = expit(y * f)  # 1 / (1 + exp(-y f))
        grad = -y * (1.0 - p) / n
        return LossDerivatives(grad, p * (1.0 - p) / n)
    return _survival_derivatives(outcome, f)


def _log_risk_set_sums(time, f) -> np.ndarray:
    """log sum_{j: t_j >= t_i} exp(f_j) via a suffix log-sum-exp scan.

    The running logaddexp keeps every suffix stable even when scores span
    hundreds of units, where a single global shift would underflow late
    risk sets.
    """
    order = np.argsort(time, kind="stable")
    t_sorted = time[order]
    log_suffix = np.logaddexp.accumulate(f[order][::-1])[::-1]
    start = np.searchsorted(t_sorted, time, side="left")
    return log_suffix[start]


def _survival_derivatives(outcome: Outcome, f) -> LossDerivatives:
    time, event = outcome.time, outcome.event
    if event.sum() == 0:
        raise DataError("survival loss is undefined when every sample is censored")
    n = time.size
    order = np.argsort(time, kind="stable")
    t_sorted = time[order]
    log_suffix = np.logaddexp.accumulate(f[order][::-1])[::-1]
    # risk-set log-sums per sorted position; ties share the first occurrence
    rs_sorted = log_suffix[np.searchsorted(t_sorted, t_sorted, side="left")]
    is_event = event[order] == 1.0
    t_events = t_sorted[is_event]
    rs_events = rs_sorted[is_event]
    # relative risk of sample i within the risk set of event l, for events
    # with t_l <= t_i; every kept entry is exp(f_i - logS_l) <= 1
    in_risk_set = np.arange(t_events.size)[None, :] < np.searchsorted(
        t_events, time, side="right"
    )[:, None]
    p = np.exp(np.where(in_risk_set, f[:, None] - rs_events[None, :], -np.inf))
    a = p.sum(axis=1)
    grad = -(event - a) / n
    hessian = (np.diag(a) - p @ p.T) / n
    return LossDerivatives(gradient=grad, hessian=0.5 * (hessian + hessian.T))
