"""End-to-end orchestration: base-model training, both ensemble recipes,
held-out evaluation, and reproducible run artifacts.

Every stochastic stage draws its seed from the single run seed through
named sub-streams (``derive_seed``), and every (model index, configuration)
pair maps to one fixed training seed.  Training the same pair twice --
inside the tuple enumeration, its brute-force cross-check, or a re-run from
a manifest -- therefore yields bit-identical results, which also makes
memoization across tuples sound.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bayesopt import EnumerationResult, enumerate_ensembles
from .data import Dataset, destandardize_temperature
from .ensemble import (
    EnsembleWeights,
    combine_predictions,
    finalize_weights,
    weight_history_tsv,
    weights_from_predictions,
)
from .errors import CheckpointVersionError, ConfigurationError
from .metrics import (
    ForecastResult,
    SequencePredictor,
    forecast_iterative,
    format_metrics_table,
    mape_with_exclusions,
    mse,
)
from .qlstm import (
    HyperConfig,
    TrainReport,
    forward_sequence,
    init_classical_lstm,
    init_qlstm,
    predict_batch,
    train,
)

ENSEMBLE_CHECKPOINT_VERSION = 1

# reference magnitudes from full-scale tuning runs, shown for sanity checks
REFERENCE_LEARNING_RATES = {"genhyb": (0.0677, 0.0691), "bo-q": (0.0726, 0.0522)}
REFERENCE_COMBINING_WEIGHTS = {"genhyb": (0.50272, 0.49728), "bo-q": (0.50123, 0.49876)}


def derive_seed(master_seed: int, *names) -> int:
    """A stable named sub-stream seed (independent of process hashing)."""
    text = json.dumps([int(master_seed), *map(str, names)])
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "big") % (2**63)


def config_digest(config: HyperConfig) -> str:
    return hashlib.sha256(
        json.dumps(config.to_dict(), sort_keys=True).encode()
    ).hexdigest()[:16]


@dataclass
class BaseModelRun:
    """One trained base model plus its aligned held-out predictions."""

    model_index: int
    config: HyperConfig
    kind: str
    model: object
    report: TrainReport
    val_predictions: np.ndarray  # aligned on the shared validation targets
    test_predictions: np.ndarray
    test_target_rows: np.ndarray

    @property
    def tag(self) -> str:
        return f"{self.kind}-seq{self.config.sequence_length}"


def train_base_model(dataset: Dataset, config: HyperConfig, model_index: int,
                     master_seed: int, *, kind: str = "qlstm",
                     val_fraction: float = 0.1, memo: dict | None = None) -> BaseModelRun:
    """Train one base model on the inner split and collect its predictions.

    The training seed derives from (run seed, model index, configuration),
    so repeated calls are bit-identical; ``memo`` short-circuits them.
    """
    key = (kind, model_index, config)
    if memo is not None and key in memo:
        return memo[key]
    train_part, val_part = dataset.train_val_windows(config.sequence_length, val_fraction)
    test_part = dataset.test_windows(config.sequence_length)
    seed = derive_seed(master_seed, "train", kind, model_index, config_digest(config))
    if kind == "qlstm":
        model = init_qlstm(config, input_dim=dataset.train_matrix.shape[1], seed=seed)
    elif kind == "lstm":
        model = init_classical_lstm(config, input_dim=dataset.train_matrix.shape[1], seed=seed)
    else:
        raise ConfigurationError(f"unknown model kind {kind!r}")
    report = train(model, config, train_part, val_part, seed=seed)
    run = BaseModelRun(
        model_index=model_index,
        config=config,
        kind=kind,
        model=model,
        report=report,
        val_predictions=predict_batch(model, val_part.inputs),
        test_predictions=predict_batch(model, test_part.inputs),
        test_target_rows=test_part.target_rows,
    )
    if memo is not None:
        memo[key] = run
    return run


def validation_targets(dataset: Dataset, sequence_lengths, val_fraction: float = 0.1) -> np.ndarray:
    """Shared validation targets (identical for every window length)."""
    _, val_part = dataset.train_val_windows(max(sequence_lengths), val_fraction)
    return val_part.targets


def probe_objective(dataset: Dataset, sequence_length: int, model_index: int,
                    master_seed: int, *, probe_epochs: int = 5,
                    val_fraction: float = 0.1):
    """Objective for the tuners: validation MSE of a short probe training run."""

    def objective(config: HyperConfig) -> float:
        probe = HyperConfig(**{**config.to_dict(), "epochs": probe_epochs})
        run = train_base_model(dataset, probe, model_index, master_seed,
                               val_fraction=val_fraction)
        return run.report.final_val_loss

    return objective


# ---------------------------------------------------------------------------
# Ensembles
# ---------------------------------------------------------------------------


@dataclass
class EnsembleRun:
    architecture: str  # "genhyb" or "bo-q"
    base_runs: list
    weight_state: EnsembleWeights
    weights: np.ndarray
    metrics_rows: list
    test_forecasts: list  # ForecastResult per model + ensemble
    enumeration: EnumerationResult | None = None


def _align_test_predictions(base_runs) -> tuple[np.ndarray, np.ndarray]:
    """Per-model test predictions restricted to the rows every model covers."""
    start = max(run.test_target_rows[0] for run in base_runs)
    preds = []
    for run in base_runs:
        offset = start - run.test_target_rows[0]
        preds.append(run.test_predictions[offset:])
    rows = base_runs[0].test_target_rows
    common_rows = rows[start - rows[0] :]
    return np.vstack(preds), common_rows


def _metric_row(name: str, y_true_c: np.ndarray, y_pred_c: np.ndarray,
                std_mse: float) -> dict:
    value, excluded = mape_with_exclusions(y_true_c, y_pred_c)
    return {
        "model": name,
        "mape_pct": value,
        "mse": mse(y_true_c, y_pred_c),
        "mse_standardized": std_mse,
        "excluded": excluded,
    }


def evaluate_ensemble(dataset: Dataset, base_runs, weights, architecture: str,
                      weight_state: EnsembleWeights,
                      enumeration: EnumerationResult | None = None) -> EnsembleRun:
    """Test-set one-step evaluation of the base models and their combination."""
    preds_std, common_rows = _align_test_predictions(base_runs)
    y_std = dataset.test_matrix[common_rows, 0]
    y_c = destandardize_temperature(y_std, dataset.scaler)

    rows, forecasts = [], []
    for run, model_preds in zip(base_runs, preds_std):
        pred_c = destandardize_temperature(model_preds, dataset.scaler)
        rows.append(_metric_row(run.tag, y_c, pred_c, mse(y_std, model_preds)))
        forecasts.append(ForecastResult(list(map(int, common_rows)), y_c, pred_c,
                                        run.tag, "test-one-step"))
    combined_std = combine_predictions(weights, preds_std)
    combined_c = destandardize_temperature(combined_std, dataset.scaler)
    rows.append(_metric_row(f"{architecture}-ensemble", y_c, combined_c,
                            mse(y_std, combined_std)))
    forecasts.append(ForecastResult(list(map(int, common_rows)), y_c, combined_c,
                                    f"{architecture}-ensemble", "test-one-step"))
    return EnsembleRun(architecture, list(base_runs), weight_state, weights,
                       rows, forecasts, enumeration)


def run_genhyb_ensemble(dataset: Dataset, configs, master_seed: int, *,
                        lam: float = 0.85, gamma: float = 0.85, nu: int | None = None,
                        memo: dict | None = None, jobs: int = 1) -> EnsembleRun:
    """Train one base model per configuration and combine them adaptively.

    Weight evolution runs over the shared validation segment (never the
    test set); test metrics come from the finalized simplex weights.
    """
    memo = {} if memo is None else memo
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(train_base_model, dataset, cfg, i, master_seed, memo=memo)
                for i, cfg in enumerate(configs)
            ]
            base_runs = [f.result() for f in futures]
    else:
        base_runs = [train_base_model(dataset, cfg, i, master_seed, memo=memo)
                     for i, cfg in enumerate(configs)]
    val_y = validation_targets(dataset, [cfg.sequence_length for cfg in configs])
    val_preds = np.vstack([run.val_predictions for run in base_runs])
    state = weights_from_predictions(val_y, val_preds, lam=lam, gamma=gamma, nu=nu)
    weights = finalize_weights(state)
    return evaluate_ensemble(dataset, base_runs, weights, "genhyb", state)


def run_boq_ensemble(dataset: Dataset, ksets: list, master_seed: int, *,
                     lam: float = 0.85, gamma: float = 0.85, nu: int | None = None,
                     memo: dict | None = None, jobs: int = 1) -> EnsembleRun:
    """Enumerate every K^m configuration tuple and keep the winner.

    The tuple objective is the adaptively-weighted forecast MSE on the
    validation segment; the winning tuple's weights carry to the test set.
    """
    memo = {} if memo is None else memo
    seqs = []
    for kset in ksets:
        lengths = {cfg.sequence_length for cfg in kset.configs}
        if len(lengths) != 1:
            raise ConfigurationError("each K-best set must share one sequence length")
        seqs.append(lengths.pop())
    val_y = validation_targets(dataset, seqs)

    if jobs > 1:
        pairs = [(m, cfg) for m, kset in enumerate(ksets) for cfg in kset.configs]
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(train_base_model, dataset, cfg, m, master_seed, memo=memo)
                       for m, cfg in pairs]
            for future in futures:
                future.result()

    def predict_fn(model_index: int, config: HyperConfig) -> np.ndarray:
        run = train_base_model(dataset, config, model_index, master_seed, memo=memo)
        return run.val_predictions

    enumeration = enumerate_ensembles(ksets, predict_fn, val_y, lam=lam, gamma=gamma, nu=nu)
    winner = enumeration.best
    base_runs = [train_base_model(dataset, cfg, m, master_seed, memo=memo)
                 for m, cfg in enumerate(winner.configs)]
    # the weight evolution that produced the winning objective
    val_preds = np.vstack([run.val_predictions for run in base_runs])
    state = weights_from_predictions(val_y, val_preds, lam=lam, gamma=gamma, nu=nu)
    return evaluate_ensemble(dataset, base_runs, winner.weights, "bo-q", state,
                             enumeration=enumeration)


def forecast_horizon(dataset: Dataset, base_runs, weights, horizon: int = 24,
                     *, model_tag: str = "ensemble") -> ForecastResult:
    """Iterative multi-step forecast from the end of the training split."""
    max_seq = max(run.config.sequence_length for run in base_runs)
    context = dataset.train_matrix[-max_seq:]
    future = dataset.test_matrix[:horizon, 0] if len(dataset.test_matrix) >= horizon else None
    predictors = [
        SequencePredictor(run.config.sequence_length,
                          (lambda m: lambda w: forward_sequence(m, w))(run.model))
        for run in base_runs
    ]
    return forecast_iterative(predictors, weights, context, dataset.scaler,
                              horizon=horizon, true_future=future, model_tag=model_tag)


# ---------------------------------------------------------------------------
# Ensemble checkpoints
# ---------------------------------------------------------------------------


def save_ensemble_checkpoint(path, architecture: str, weights, models: list) -> None:
    """Persist an ensemble: ``models`` is a list of (kind, config, model)."""
    payload = {
        "version": np.array(ENSEMBLE_CHECKPOINT_VERSION),
        "architecture": np.array(architecture),
        "n_models": np.array(len(models)),
        "weights": np.asarray(weights, dtype=float),
    }
    for i, (kind, config, model) in enumerate(models):
        payload[f"model{i}_kind"] = np.array(kind)
        payload[f"model{i}_config"] = np.array(json.dumps(config.to_dict(), sort_keys=True))
        payload[f"model{i}_input_dim"] = np.array(model.input_dim)
        for key, value in model.param_arrays().items():
            payload[f"model{i}_{key}"] = value
    np.savez(path, **payload)


def ensemble_checkpoint_parts(run: EnsembleRun) -> list:
    return [(base.kind, base.config, base.model) for base in run.base_runs]


def load_ensemble_checkpoint(path):
    """Returns (architecture, weights, [(kind, config, model), ...])."""
    from .quantum import VQCBlock
    from .qlstm import GATE_NAMES, ClassicalLSTMParams, PersistenceModel, QLSTMParams

    with np.load(path, allow_pickle=False) as data:
        version = int(data["version"])
        if version != ENSEMBLE_CHECKPOINT_VERSION:
            raise CheckpointVersionError(
                f"ensemble checkpoint version {version} unsupported "
                f"(expected {ENSEMBLE_CHECKPOINT_VERSION})"
            )
        architecture = str(data["architecture"])
        weights = data["weights"]
        models = []
        for i in range(int(data["n_models"])):
            kind = str(data[f"model{i}_kind"])
            config = HyperConfig.from_dict(json.loads(str(data[f"model{i}_config"])))
            input_dim = int(data[f"model{i}_input_dim"])
            if kind == "persistence":
                model = PersistenceModel(input_dim=input_dim)
            elif kind == "qlstm":
                blocks = tuple(
                    VQCBlock(config.n_qubits, config.n_layers, data[f"model{i}_theta_{n}"])
                    for n in GATE_NAMES
                )
                model = QLSTMParams(
                    vqc=blocks,
                    w_in=data[f"model{i}_w_in"], b_in=data[f"model{i}_b_in"],
                    w_h=data[f"model{i}_w_h"], b_h=data[f"model{i}_b_h"],
                    w_y=data[f"model{i}_w_y"], b_y=data[f"model{i}_b_y"],
                    hidden_units=config.hidden_units, input_dim=input_dim,
                )
            elif kind == "lstm":
                model = ClassicalLSTMParams(
                    w_f=data[f"model{i}_w_f"], b_f=data[f"model{i}_b_f"],
                    w_i=data[f"model{i}_w_i"], b_i=data[f"model{i}_b_i"],
                    w_g=data[f"model{i}_w_g"], b_g=data[f"model{i}_b_g"],
                    w_o=data[f"model{i}_w_o"], b_o=data[f"model{i}_b_o"],
                    w_y=data[f"model{i}_w_y"], b_y=data[f"model{i}_b_y"],
                    hidden_units=config.hidden_units, input_dim=input_dim,
                )
            else:
                raise CheckpointVersionError(f"unknown model kind {kind!r}")
            models.append((kind, config, model))
    return architecture, weights, models


# ---------------------------------------------------------------------------
# Manifests
# ---------------------------------------------------------------------------


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class StageTimer:
    times: dict = field(default_factory=dict)

    def time(self, name: str):
        timer = self

        class _Ctx:
            def __enter__(self):
                self.start = time.perf_counter()

            def __exit__(self, *exc):
                timer.times[name] = timer.times.get(name, 0.0) + time.perf_counter() - self.start

        return _Ctx()


def write_manifest(directory, command: str, resolved_config: dict, seed: int,
                   wall_times: dict, artifact_paths: list) -> Path:
    directory = Path(directory)
    manifest = {
        "command": command,
        "config": resolved_config,
        "seed": seed,
        "wall_times_sec": {k: round(v, 3) for k, v in wall_times.items()},
        "artifacts": [
            {"path": str(Path(p).relative_to(directory)), "sha256": sha256_file(p)}
            for p in artifact_paths
        ],
    }
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def metrics_report(rows: list) -> str:
    return format_metrics_table(rows)
