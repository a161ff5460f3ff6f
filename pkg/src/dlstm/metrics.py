"""Forecast accuracy in raw (denormalized) units."""

from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class EvalReport:
    mape: float  # fraction, not percent
    mse_plain: float
    mse_relative: float
    mae: float
    n: int

    def to_dict(self):
        return asdict(self)


def evaluate(actual, forecast):
    """Compare a forecast with the observed values.

    ``mse_relative`` is the squared error normalized by the actual energy,
    ``sum((y - yhat)^2) / sum(y^2)``; ``mse_plain`` is the ordinary mean.
    """
    y = np.asarray(actual, dtype=float).ravel()
    yhat = np.asarray(forecast, dtype=float).ravel()
    if y.shape != yhat.shape:
        raise ValueError(f"length mismatch: {y.size} actual vs {yhat.size} forecast")
    if y.size == 0:
        raise ValueError("nothing to evaluate")
    zero = np.flatnonzero(y == 0)
    if zero.size:
        raise ValueError(f"MAPE undefined: actual value at index {int(zero[0])} is zero")
    err = y - yhat
    return EvalReport(
        mape=float(np.mean(np.abs(err) / np.abs(y))),
        mse_plain=float(np.mean(err ** 2)),
        mse_relative=float(np.sum(err ** 2) / np.sum(y ** 2)),
        mae=float(np.mean(np.abs(err))),
        n=int(y.size),
    )
