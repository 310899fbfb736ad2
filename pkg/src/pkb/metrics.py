"""Prediction-accuracy metrics: MSE, classification error, concordance index."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError


def mse(y, y_hat) -> float:
    """Mean squared error."""
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y.shape != y_hat.shape or y.ndim != 1 or y.size == 0:
        raise DataError("mse needs two 1-d vectors of equal, nonzero length")
    return float(np.mean((y - y_hat) ** 2))


def classification_error(labels, probabilities) -> float:
    """Misclassification rate for labels in {-1,+1} against P(y=+1)."""
    labels = np.asarray(labels, dtype=float)
    probabilities = np.asarray(probabilities, dtype=float)
    predicted = np.where(probabilities >= 0.5, 1.0, -1.0)
    return float(np.mean(predicted != labels))


def binary_log_loss(labels, scores) -> float:
    """Mean log loss for labels in {-1,+1} against raw scores (log odds)."""
    labels = np.asarray(labels, dtype=float)
    scores = np.asarray(scores, dtype=float)
    return float(np.mean(np.logaddexp(0.0, -labels * scores)))


@dataclass(frozen=True)
class ConcordanceResult:
    """Concordance total, permissible pair count, and their ratio."""

    concordance: float
    permissible_pairs: int
    c_index: float


def c_index(times, events, risks) -> ConcordanceResult:
    """Concordance index between predicted risks and observed survival.

    Pair rules, applied to every unordered pair:
      * unequal times, the earlier sample censored -> omitted;
      * unequal times otherwise -> 0.5 on a risk tie, 1 if the higher-risk
        sample failed earlier, else 0;
      * tied times, both censored -> omitted;
      * tied times, both events -> 1 on a risk tie, else 0.5;
      * tied times, one censored -> 1 if the censored sample has the smaller
        risk, else 0.
    """
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=float)
    risks = np.asarray(risks, dtype=float)
    n = times.size
    if not (times.shape == events.shape == risks.shape) or n < 2:
        raise DataError("c_index needs three equal-length vectors with at least 2 samples")
    if not np.all(times > 0):
        raise DataError("survival times must be positive")

    concordance = 0.0
    permissible = 0
    for i in range(n - 1):
        ti, ei, ri = times[i], events[i], risks[i]
        tj, ej, rj = times[i + 1 :], events[i + 1 :], risks[i + 1 :]

        unequal = tj != ti
        earlier_event = np.where(ti < tj, ei, ej)
        usable_unequal = unequal & (earlier_event == 1.0)
        risk_tie = rj == ri
        higher_risk_earlier = ((ri > rj) & (ti < tj)) | ((rj > ri) & (tj < ti))
        concordance += 0.5 * np.count_nonzero(usable_unequal & risk_tie)
        concordance += 1.0 * np.count_nonzero(usable_unequal & higher_risk_earlier)
        permissible += int(np.count_nonzero(usable_unequal))

        tied = ~unequal
        both_events = tied & (ei == 1.0) & (ej == 1.0)
        concordance += 1.0 * np.count_nonzero(both_events & risk_tie)
        concordance += 0.5 * np.count_nonzero(both_events & ~risk_tie)
        one_censored = tied & (ej != ei)
        censored_risk = np.where(ei == 0.0, ri, rj)
        other_risk = np.where(ei == 0.0, rj, ri)
        concordance += 1.0 * np.count_nonzero(one_censored & (censored_risk < other_risk))
        permissible += int(np.count_nonzero(both_events)) + int(np.count_nonzero(one_censored))

    if permissible == 0:
        raise DataError("c-index undefined: no permissible pairs")
    return ConcordanceResult(float(concordance), permissible, float(concordance) / permissible)
