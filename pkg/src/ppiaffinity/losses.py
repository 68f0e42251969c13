"""Composite training objective: Huber regression plus within-batch ranking.

The total loss is ``lam * huber + (1 - lam) * rank`` over a batch of labels
y and predictions yhat. Two rank variants exist:

* ``surrogate`` (default): the standard pairwise-logistic margin loss,
  summing log(1 + exp(-(yhat_i - yhat_j))) over ordered pairs with
  y_i > y_j. Differentiable in the predictions; this is what training uses.
* ``verbatim``: sums log(1 + exp(y_i - y_j)) over ordered pairs gated by the
  prediction-side indicator yhat_i > yhat_j. Its gradient in yhat is zero
  almost everywhere (the predictions appear only inside the indicator), so
  it cannot drive descent; it is kept as a computable diagnostic, and the
  composite gradient under this variant comes from the Huber term alone.

All functions are pure and operate on 1-D arrays of equal length.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RANK_VARIANTS = ("verbatim", "surrogate")


@dataclass(frozen=True)
class LossConfig:
    """Mixture weight ``lam`` in [0, 1], Huber width ``delta`` in pKd units."""

    lam: float = 0.5
    delta: float = 1.0
    rank_variant: str = "surrogate"

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lam must lie in [0, 1], got {self.lam}")
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.rank_variant not in RANK_VARIANTS:
            raise ValueError(
                f"rank_variant must be one of {RANK_VARIANTS}, got {self.rank_variant!r}"
            )


@dataclass
class LossOutput:
    """Total plus its two components and d(total)/d(yhat)."""

    total: float
    huber: float
    rank: float
    grad: np.ndarray


def _check_pair(y, yhat) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    if y.ndim != 1 or yhat.ndim != 1:
        raise ValueError("y and yhat must be 1-D")
    if y.shape != yhat.shape:
        raise ValueError(f"length mismatch: y has {y.size}, yhat has {yhat.size}")
    if y.size == 0:
        raise ValueError("empty batch")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(yhat))):
        raise ValueError("y and yhat must be finite")
    return y, yhat


def huber_loss(y, yhat, delta: float = 1.0) -> tuple[float, np.ndarray]:
    """Mean Huber loss and its gradient in yhat.

    Per element: 0.5 * e**2 for |e| <= delta, else delta * |e| - 0.5 * delta**2,
    with e = y - yhat. The gradient is clip(yhat - y, -delta, delta) / n.
    """
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    y, yhat = _check_pair(y, yhat)
    n = y.size
    err = y - yhat
    abs_err = np.abs(err)
    quadratic = abs_err <= delta
    per_item = np.where(
        quadratic, 0.5 * err**2, delta * abs_err - 0.5 * delta**2
    )
    value = float(per_item.sum() / n)
    grad = np.clip(yhat - y, -delta, delta) / n
    return value, grad


def rank_loss_verbatim(y, yhat) -> float:
    """Prediction-gated pairwise loss, value only.

    (1/n) * sum over ordered pairs (i, j) of 1[yhat_i > yhat_j]
    * log(1 + exp(y_i - y_j)). Self-pairs never fire the strict indicator.
    """
    y, yhat = _check_pair(y, yhat)
    n = y.size
    fired = yhat[:, None] > yhat[None, :]
    if not fired.any():
        return 0.0
    terms = np.logaddexp(0.0, y[:, None] - y[None, :])
    return float(terms[fired].sum() / n)


def rank_loss_surrogate(y, yhat) -> tuple[float, np.ndarray]:
    """Pairwise-logistic margin loss and its gradient in yhat.

    (1/n) * sum over ordered pairs with y_i > y_j of
    log(1 + exp(-(yhat_i - yhat_j))). Ties in y contribute nothing: no
    preferred order exists. Evaluated via logaddexp for stability at large
    margins.
    """
    y, yhat = _check_pair(y, yhat)
    n = y.size
    preferred = y[:, None] > y[None, :]
    grad = np.zeros(n)
    if not preferred.any():
        return 0.0, grad
    margins = yhat[:, None] - yhat[None, :]
    terms = np.where(preferred, np.logaddexp(0.0, -margins), 0.0)
    value = float(terms.sum() / n)
    # d/dm log(1 + exp(-m)) = -sigma(-m); each pair pushes i up and j down.
    slack = np.where(preferred, 1.0 / (1.0 + np.exp(margins)), 0.0)
    grad = (slack.sum(axis=0) - slack.sum(axis=1)) / n
    return value, grad


def composite_loss(y, yhat, config: LossConfig) -> LossOutput:
    """Mix the Huber and rank terms: total = lam * huber + (1 - lam) * rank.

    Under the verbatim variant the rank term contributes value only and the
    gradient is lam * grad_huber.
    """
    huber_value, huber_grad = huber_loss(y, yhat, config.delta)
    if config.rank_variant == "verbatim":
        rank_value = rank_loss_verbatim(y, yhat)
        rank_grad = None
    else:
        rank_value, rank_grad = rank_loss_surrogate(y, yhat)
    total = config.lam * huber_value + (1.0 - config.lam) * rank_value
    grad = config.lam * huber_grad
    if rank_grad is not None:
        grad = grad + (1.0 - config.lam) * rank_grad
    return LossOutput(total=total, huber=huber_value, rank=rank_value, grad=grad)
