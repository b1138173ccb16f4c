"""Forecast-accuracy metrics and multi-step forecast emission.

MAPE follows the percentage convention, 100/N * sum(|y - yhat| / |y|);
targets with |y| below 1e-8 are excluded from the sum and counted in a
reported exclusion tally (temperatures in Celsius do cross zero).  The
24-hour forecast is iterative: each one-step prediction is fed back as the
next window's temperature while the exogenous features persist from the
last observed hour.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ScalerState, destandardize_temperature
from .errors import ConfigurationError, MetricUndefinedError, ShapeError

ZERO_TOLERANCE = 1e-8


def _paired(y_true, y_pred):
    y_true = np.asarray(y_true, dtype=float).reshape(-1)
    y_pred = np.asarray(y_pred, dtype=float).reshape(-1)
    if y_true.shape != y_pred.shape:
        raise ShapeError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    if y_true.size < 1:
        raise ShapeError("need at least one pair")
    return y_true, y_pred


def mape_with_exclusions(y_true, y_pred) -> tuple[float, int]:
    """Mean absolute percentage error plus the count of excluded targets."""
    y_true, y_pred = _paired(y_true, y_pred)
    mask = np.abs(y_true) >= ZERO_TOLERANCE
    excluded = int((~mask).sum())
    if excluded == y_true.size:
        raise MetricUndefinedError("every target was below the zero-tolerance; MAPE undefined")
    value = 100.0 * float(np.mean(np.abs(y_true[mask] - y_pred[mask]) / np.abs(y_true[mask])))
    return value, excluded


def mape(y_true, y_pred) -> float:
    return mape_with_exclusions(y_true, y_pred)[0]


def mse(y_true, y_pred) -> float:
    y_true, y_pred = _paired(y_true, y_pred)
    diff = y_true - y_pred
    return float(np.mean(diff * diff))


@dataclass
class ForecastResult:
    """A forecast series in physical units, ready for plotting."""

    timestamps: list
    y_true: np.ndarray | None  # Celsius; None when truth is unavailable
    y_pred: np.ndarray  # Celsius
    model: str
    horizon: str  # "test-one-step" or "24h"

    def __post_init__(self):
        if self.y_true is not None and len(self.y_true) != len(self.y_pred):
            raise ShapeError("y_true and y_pred must have equal lengths")
        if len(self.timestamps) != len(self.y_pred):
            raise ShapeError("timestamps and y_pred must have equal lengths")


@dataclass
class SequencePredictor:
    """A trained one-step model viewed as (sequence length, predict function)."""

    sequence_length: int
    predict: object  # callable (sequence_length, n_features) -> standardized temperature


def forecast_iterative(
    predictors: list[SequencePredictor],
    weights,
    context: np.ndarray,
    scaler: ScalerState,
    horizon: int = 24,
    *,
    true_future=None,
    teacher_forcing: bool = False,
    temperature_col: int = 0,
    model_tag: str = "ensemble",
    start_timestamp: int = 0,
) -> ForecastResult:
    """Roll a (possibly weighted multi-model) forecaster ``horizon`` steps ahead.

    ``context`` is the standardized trailing history (at least the longest
    window).  Predictions are written back into the temperature column of a
    growing buffer; with ``teacher_forcing`` the true standardized value is
    written back instead (requires ``true_future``).
    """
    if horizon < 1:
        raise ConfigurationError(f"horizon must be >= 1, got {horizon}")
    weights = np.asarray(weights, dtype=float)
    if len(weights) != len(predictors):
        raise ShapeError("one weight per predictor required")
    max_seq = max(p.sequence_length for p in predictors)
    context = np.asarray(context, dtype=float)
    if context.ndim != 2 or len(context) < max_seq:
        raise ShapeError(f"context must hold at least {max_seq} rows")
    if teacher_forcing and true_future is None:
        raise ConfigurationError("teacher forcing requires the true future values")
    if true_future is not None and len(true_future) < horizon:
        raise ShapeError("true_future shorter than the forecast horizon")

    buffer = context[-max_seq:].copy()
    preds_std = np.empty(horizon)
    for step in range(horizon):
        combined = 0.0
        for w, predictor in zip(weights, predictors):
            window = buffer[-predictor.sequence_length :]
            combined += w * float(predictor.predict(window))
        preds_std[step] = combined
        next_row = buffer[-1].copy()
        next_row[temperature_col] = (
            float(true_future[step]) if teacher_forcing else combined
        )
        buffer = np.vstack([buffer, next_row])

    y_pred = destandardize_temperature(preds_std, scaler)
    y_true = None
    if true_future is not None:
        y_true = destandardize_temperature(np.asarray(true_future[:horizon], float), scaler)
    return ForecastResult(
        timestamps=[start_timestamp + k for k in range(1, horizon + 1)],
        y_true=y_true,
        y_pred=y_pred,
        model=model_tag,
        horizon="24h" if horizon == 24 else f"{horizon}-step",
    )


# ---------------------------------------------------------------------------
# Plot-ready emission
# ---------------------------------------------------------------------------


def forecast_to_tsv(results: list[ForecastResult]) -> str:
    """Delimited text (timestamp, y_true, y_pred, model) for any plotting tool."""
    lines = ["timestamp\ty_true\ty_pred\tmodel"]
    for res in results:
        for k, ts in enumerate(res.timestamps):
            truth = "" if res.y_true is None else format(res.y_true[k], ".10g")
            lines.append(f"{ts}\t{truth}\t{res.y_pred[k]:.10g}\t{res.model}")
    return "\n".join(lines) + "\n"


def format_metrics_table(rows: list[dict]) -> str:
    """Fixed-order text table with one MAPE/MSE line per model."""
    width = max([len("model")] + [len(r["model"]) for r in rows])
    header = f"{'model'.ljust(width)}  {'mape_pct':>12}  {'mse':>14}  {'excluded':>8}"
    lines = [header, "-" * len(header)]
    for r in rows:
        lines.append(
            f"{r['model'].ljust(width)}  {r['mape_pct']:12.6f}  {r['mse']:14.8f}  "
            f"{r.get('excluded', 0):8d}"
        )
    return "\n".join(lines) + "\n"
