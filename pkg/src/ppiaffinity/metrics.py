"""Evaluation statistics: Pearson r, Spearman rho, RMSE.

Correlation of a constant vector is an explicit error rather than NaN, so a
silently undefined score can never win a model-selection comparison.
Spearman uses average ranks for ties.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DatasetValidationError, DataWarning, UndefinedCorrelationError


@dataclass
class EvalReport:
    """Aligned-vector evaluation summary.

    ``pearson`` / ``spearman`` are None when undefined (constant vector or
    fewer than two points); ``rmse`` is always present.
    """

    pearson: float | None
    spearman: float | None
    rmse: float
    n: int

    def to_dict(self) -> dict:
        return {
            "pearson": self.pearson,
            "spearman": self.spearman,
            "rmse": self.rmse,
            "n": self.n,
        }


def _check_lengths(y, yhat, minimum: int) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    if y.ndim != 1 or yhat.ndim != 1 or y.shape != yhat.shape:
        raise ValueError("y and yhat must be 1-D with equal length")
    if y.size < minimum:
        raise ValueError(f"need at least {minimum} points, got {y.size}")
    return y, yhat


def pearson(y, yhat) -> float:
    """Sample Pearson correlation coefficient."""
    y, yhat = _check_lengths(y, yhat, 2)
    yc = y - y.mean()
    pc = yhat - yhat.mean()
    denom_y = float(np.sqrt((yc**2).sum()))
    denom_p = float(np.sqrt((pc**2).sum()))
    if denom_y == 0.0 or denom_p == 0.0:
        raise UndefinedCorrelationError(
            "correlation undefined: at least one vector is constant"
        )
    r = float((yc * pc).sum() / (denom_y * denom_p))
    return min(1.0, max(-1.0, r))


def average_ranks(x) -> np.ndarray:
    """1-based ranks; tied values receive the mean of their rank range."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.size, dtype=np.float64)
    sorted_x = x[order]
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(y, yhat) -> float:
    """Pearson correlation of average ranks."""
    y, yhat = _check_lengths(y, yhat, 2)
    return pearson(average_ranks(y), average_ranks(yhat))


def rmse(y, yhat) -> float:
    """Root mean squared residual."""
    y, yhat = _check_lengths(y, yhat, 1)
    return float(np.sqrt(np.mean((y - yhat) ** 2)))


def evaluate(predictions: dict[str, float], labels: dict[str, float]) -> EvalReport:
    """Assemble an EvalReport over the shared id set.

    Evaluation is restricted to the intersection of the two id sets, with a
    warning when they differ; an empty intersection is an error. Undefined
    correlations are flagged as None instead of raised, so callers logging
    per-epoch metrics survive constant-prediction phases.
    """
    shared = [cid for cid in predictions if cid in labels]
    if not shared:
        raise DatasetValidationError("no shared ids between predictions and labels")
    if len(shared) != len(predictions) or len(shared) != len(labels):
        warnings.warn(
            f"id sets differ: {len(predictions)} predictions, {len(labels)} labels, "
            f"{len(shared)} shared; evaluating the intersection",
            DataWarning,
            stacklevel=2,
        )
    yhat = np.array([predictions[cid] for cid in shared], dtype=np.float64)
    y = np.array([labels[cid] for cid in shared], dtype=np.float64)
    error = rmse(y, yhat)
    r = rho = None
    if len(shared) >= 2:
        try:
            r = pearson(y, yhat)
        except UndefinedCorrelationError:
            pass
        try:
            rho = spearman(y, yhat)
        except UndefinedCorrelationError:
            pass
    return EvalReport(pearson=r, spearman=rho, rmse=error, n=len(shared))
