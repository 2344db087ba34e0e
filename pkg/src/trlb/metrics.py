"""Prediction-accuracy metrics over a designated subset of entries."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class MetricsReport:
    rmse: float
    mae: float
    count: int

    def as_dict(self):
        return {"rmse": self.rmse, "mae": self.mae, "count": self.count}

    def to_json(self) -> str:
        return json.dumps(self.as_dict())


def evaluate(model, tensor, positions) -> MetricsReport:
    """RMSE and MAE of model predictions against observed weights.

    Pure function of (model, tensor, positions); single-pass float64
    accumulation, no compensation (subset sizes here do not need it).
    """
    positions = np.asarray(positions, dtype=np.int64)
    if positions.size == 0:
        raise DomainError("cannot evaluate on an empty subset")
    ii, jj, kk = (c[positions] for c in tensor.coords)
    residual = tensor.values[positions] - model.predict_many(ii, jj, kk)
    rmse = float(np.sqrt(np.mean(residual * residual)))
    mae = float(np.mean(np.abs(residual)))
    return MetricsReport(rmse=rmse, mae=mae, count=int(positions.size))
