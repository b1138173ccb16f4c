"""Quantum-hybrid LSTM ensembles for short-term weather forecasting.

The package provides an exact statevector simulator for small variational
circuits, a quantum LSTM (plus a classical baseline) trained by
backpropagation through time with parameter-shift gradients, swarm/genetic/
Bayesian hyperparameter tuners, inverse-error adaptive ensemble weighting,
an hourly-weather data pipeline, and a reproducible CLI harness.
"""

__version__ = "0.1.0"

from . import errors
from .bayesopt import KBestSet, bo_tune, enumerate_ensembles, expected_improvement, gp_fit
from .data import ingest_csv, make_windows, prepare_dataset, synth_series
from .ensemble import combine_predictions, evolve_weights, finalize_weights
from .hyperspace import SearchSpace
from .metaheuristics import hybrid_minimize, pso_minimize, qga_minimize
from .metrics import forecast_iterative, mape, mse
from .qlstm import (
    HyperConfig,
    classical_lstm_train,
    forward_sequence,
    init_classical_lstm,
    init_qlstm,
    qlstm_step,
    train,
)
from .quantum import Gate, StateVector, VQCBlock, apply_gate, run_vqc, vqc_gradient
from .runner import run_boq_ensemble, run_genhyb_ensemble

__all__ = [
    "errors",
    "__version__",
    "KBestSet", "bo_tune", "enumerate_ensembles", "expected_improvement", "gp_fit",
    "ingest_csv", "make_windows", "prepare_dataset", "synth_series",
    "combine_predictions", "evolve_weights", "finalize_weights",
    "SearchSpace",
    "hybrid_minimize", "pso_minimize", "qga_minimize",
    "forecast_iterative", "mape", "mse",
    "HyperConfig", "classical_lstm_train", "forward_sequence",
    "init_classical_lstm", "init_qlstm", "qlstm_step", "train",
    "Gate", "StateVector", "VQCBlock", "apply_gate", "run_vqc", "vqc_gradient",
    "run_boq_ensemble", "run_genhyb_ensemble",
]
