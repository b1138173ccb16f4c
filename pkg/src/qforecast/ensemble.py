"""Adaptive inverse-error combination weights for model ensembles.

Weights evolve over a sequence of per-model absolute prediction errors:
at each step k the discounted error memory

    eps_m(k) = sum_{t=k-nu+1..k} gamma^(k-t) * e_m(t)

is inverted and normalized across models into an increment

    delta_m(k) = (1/eps_m(k)) / sum_n (1/eps_n(k)),

and the running weights move by w_m <- w_m + lambda * delta_m(k).  After the
last step the accumulated weights are normalized onto the probability
simplex.  A forgetting factor gamma < 1 makes recent errors count more.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericError, ShapeError

logger = logging.getLogger(__name__)

DEFAULT_LAMBDA = 0.85
DEFAULT_GAMMA = 0.85
ERROR_FLOOR = 1e-12


def _check_errors(errors: np.ndarray) -> np.ndarray:
    errors = np.asarray(errors, dtype=float)
    if errors.ndim != 2:
        raise ShapeError("errors must be (n_models, n_steps)")
    if not np.all(np.isfinite(errors)):
        raise NumericError("error series contains non-finite values")
    if np.any(errors < 0):
        raise NumericError("prediction errors must be non-negative")
    return errors


def exp_smoothed_error(errors, m: int, k: int, gamma: float = DEFAULT_GAMMA, nu: int | None = None) -> float:
    """Discounted error memory of model ``m`` at (1-indexed) step ``k``.

    ``nu`` is the window length; ``None`` uses the full history (nu = k).
    A zero result is floored to 1e-12 so the inversion stays finite.
    """
    errors = _check_errors(errors)
    if not 1 <= k <= errors.shape[1]:
        raise ConfigurationError(f"step k={k} outside 1..{errors.shape[1]}")
    window = k if nu is None else nu
    if not 1 <= window <= k:
        raise ConfigurationError(f"window nu={window} must satisfy 1 <= nu <= k={k}")
    ts = np.arange(k - window + 1, k + 1)  # 1-indexed step numbers
    discounts = gamma ** (k - ts)
    value = float(discounts @ errors[m, ts - 1])
    if value <= 0.0:
        logger.warning("zero smoothed error for model %d at step %d; flooring to %g", m, k, ERROR_FLOOR)
        return ERROR_FLOOR
    return value


def smoothed_errors_at(errors, k: int, gamma: float = DEFAULT_GAMMA, nu: int | None = None) -> np.ndarray:
    errors = _check_errors(errors)
    return np.array([exp_smoothed_error(errors, m, k, gamma, nu) for m in range(errors.shape[0])])


@dataclass
class EnsembleWeights:
    """Running combination weights plus the step history that produced them."""

    n_models: int
    weights: np.ndarray
    lam: float = DEFAULT_LAMBDA
    gamma: float = DEFAULT_GAMMA
    nu: int | None = None  # None = full history
    history: list = field(default_factory=list)  # one weight vector per update
    eps_history: list = field(default_factory=list)

    @classmethod
    def uniform(cls, n_models: int, lam: float = DEFAULT_LAMBDA, gamma: float = DEFAULT_GAMMA,
                nu: int | None = None) -> "EnsembleWeights":
        if n_models < 1:
            raise ConfigurationError("need at least one model")
        return cls(n_models=n_models, weights=np.full(n_models, 1.0 / n_models),
                   lam=lam, gamma=gamma, nu=nu)

    @property
    def steps_taken(self) -> int:
        return len(self.history)


def weight_update(weights: EnsembleWeights, errors, k: int) -> EnsembleWeights:
    """Apply one increment at step ``k``; returns ``weights`` with history appended."""
    errors = _check_errors(errors)
    if errors.shape[0] != weights.n_models:
        raise ShapeError(f"expected {weights.n_models} error rows, got {errors.shape[0]}")
    eps = smoothed_errors_at(errors, k, weights.gamma, weights.nu)
    if not np.all(np.isfinite(eps)):
        raise NumericError("non-finite smoothed error")
    inv = 1.0 / eps
    delta = inv / inv.sum()
    weights.weights = weights.weights + weights.lam * delta
    weights.history.append(weights.weights.copy())
    weights.eps_history.append(eps)
    return weights


def evolve_weights(errors, lam: float = DEFAULT_LAMBDA, gamma: float = DEFAULT_GAMMA,
                   nu: int | None = None) -> EnsembleWeights:
    """Run the update over every step of an error series (k = 1..T)."""
    errors = _check_errors(errors)
    state = EnsembleWeights.uniform(errors.shape[0], lam=lam, gamma=gamma, nu=nu)
    for k in range(1, errors.shape[1] + 1):
        weight_update(state, errors, k)
    return state


def finalize_weights(weights: EnsembleWeights) -> np.ndarray:
    """Normalize the accumulated weights onto the probability simplex."""
    if weights.steps_taken < 1:
        raise ConfigurationError("at least one update step is required before finalizing")
    total = weights.weights.sum()
    if total <= 0.0:
        raise ConfigurationError("accumulated weights sum to zero; cannot normalize")
    return weights.weights / total


def combine_predictions(simplex_weights, predictions) -> np.ndarray:
    """Weighted sum of per-model prediction series."""
    simplex_weights = np.asarray(simplex_weights, dtype=float)
    predictions = np.asarray(predictions, dtype=float)
    if predictions.ndim != 2:
        raise ShapeError("predictions must be (n_models, n_steps)")
    if len(simplex_weights) != predictions.shape[0]:
        raise ShapeError(
            f"{predictions.shape[0]} prediction rows but {len(simplex_weights)} weights"
        )
    return simplex_weights @ predictions


def weights_from_predictions(y_true, per_model_preds, lam: float = DEFAULT_LAMBDA,
                             gamma: float = DEFAULT_GAMMA, nu: int | None = None) -> EnsembleWeights:
    """Evolve weights from raw predictions via absolute errors |y - yhat|."""
    y_true = np.asarray(y_true, dtype=float)
    per_model_preds = np.asarray(per_model_preds, dtype=float)
    if per_model_preds.ndim != 2 or per_model_preds.shape[1] != y_true.shape[0]:
        raise ShapeError("per_model_preds must be (n_models, len(y_true))")
    errors = np.abs(per_model_preds - y_true[None, :])
    return evolve_weights(errors, lam=lam, gamma=gamma, nu=nu)


def weight_history_tsv(weights: EnsembleWeights) -> str:
    """Line-per-step export (step, weights, smoothed errors) for plotting."""
    m = weights.n_models
    header = ["step"] + [f"w_{i}" for i in range(m)] + [f"eps_{i}" for i in range(m)]
    lines = ["\t".join(header)]
    for k, (w, eps) in enumerate(zip(weights.history, weights.eps_history), start=1):
        cells = [str(k)] + [format(v, ".12g") for v in w] + [format(v, ".12g") for v in eps]
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"
