import warnings

import numpy as np
import pytest

from qforecast.data import prepare_dataset, synth_series
from qforecast.errors import CheckpointVersionError
from qforecast.qlstm import HyperConfig, PersistenceModel, predict_batch
from qforecast.runner import (
    derive_seed,
    ensemble_checkpoint_parts,
    forecast_horizon,
    load_ensemble_checkpoint,
    run_boq_ensemble,
    run_genhyb_ensemble,
    save_ensemble_checkpoint,
    train_base_model,
    validation_targets,
)

warnings.filterwarnings("ignore", message="zero IQR")


@pytest.fixture(scope="module")
def small_dataset():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return prepare_dataset(synth_series(420, seed=6))


def small_config(seq=3, **overrides):
    base = dict(learning_rate=0.05, n_layers=1, n_qubits=2, hidden_units=3,
                sequence_length=seq, batch_size=32, epochs=2)
    base.update(overrides)
    return HyperConfig(**base)


def test_derive_seed_is_stable_and_distinct():
    assert derive_seed(7, "train", 0) == derive_seed(7, "train", 0)
    assert derive_seed(7, "train", 0) != derive_seed(7, "train", 1)
    assert derive_seed(7, "train", 0) != derive_seed(8, "train", 0)
    assert derive_seed(7, "tune", 0) != derive_seed(7, "train", 0)


def test_repeated_training_is_bit_identical(small_dataset):
    cfg = small_config()
    a = train_base_model(small_dataset, cfg, 0, 99)
    b = train_base_model(small_dataset, cfg, 0, 99)
    assert a.report.train_losses == b.report.train_losses
    np.testing.assert_array_equal(a.val_predictions, b.val_predictions)
    np.testing.assert_array_equal(a.test_predictions, b.test_predictions)


def test_memo_short_circuits(small_dataset):
    cfg = small_config()
    memo = {}
    a = train_base_model(small_dataset, cfg, 0, 99, memo=memo)
    b = train_base_model(small_dataset, cfg, 0, 99, memo=memo)
    assert a is b


def test_validation_targets_align_across_window_lengths(small_dataset):
    for seqs in ([3], [5], [3, 5]):
        y = validation_targets(small_dataset, seqs)
        _, val3 = small_dataset.train_val_windows(3)
        np.testing.assert_array_equal(y, val3.targets)


def test_genhyb_jobs_parallelism_is_deterministic(small_dataset):
    configs = [small_config(3), small_config(5)]
    seq_run = run_genhyb_ensemble(small_dataset, configs, 11, jobs=1)
    par_run = run_genhyb_ensemble(small_dataset, configs, 11, jobs=4)
    np.testing.assert_array_equal(seq_run.weights, par_run.weights)
    assert seq_run.metrics_rows == par_run.metrics_rows


def test_boq_reuses_shared_trainings(small_dataset):
    from qforecast.bayesopt import KBestSet

    memo = {}
    ksets = [
        KBestSet(0, [small_config(3), small_config(3, learning_rate=0.03)], [0.0, 1.0]),
        KBestSet(1, [small_config(5), small_config(5, learning_rate=0.03)], [0.0, 1.0]),
    ]
    run = run_boq_ensemble(small_dataset, ksets, 11, memo=memo, jobs=2)
    assert run.enumeration.n_tuples == 4
    assert len(memo) == 4  # one training per distinct (model, config) pair
    assert [r["model"] for r in run.metrics_rows][-1] == "bo-q-ensemble"


def test_ensemble_checkpoint_round_trip(tmp_path, small_dataset):
    configs = [small_config(3), small_config(5)]
    run = run_genhyb_ensemble(small_dataset, configs, 13)
    path = tmp_path / "ensemble.npz"
    save_ensemble_checkpoint(path, run.architecture, run.weights,
                             ensemble_checkpoint_parts(run))
    arch, weights, models = load_ensemble_checkpoint(path)
    assert arch == "genhyb"
    np.testing.assert_array_equal(weights, run.weights)
    test_part = small_dataset.test_windows(3)
    np.testing.assert_array_equal(
        predict_batch(models[0][2], test_part.inputs),
        run.base_runs[0].test_predictions,
    )


def test_ensemble_checkpoint_version_guard(tmp_path):
    path = tmp_path / "old.npz"
    np.savez(path, version=np.array(42))
    with pytest.raises(CheckpointVersionError):
        load_ensemble_checkpoint(path)


def test_persistence_checkpoint_round_trip(tmp_path):
    cfg = small_config()
    path = tmp_path / "stub.npz"
    save_ensemble_checkpoint(path, "genhyb", [1.0],
                             [("persistence", cfg, PersistenceModel(input_dim=7))])
    _, _, models = load_ensemble_checkpoint(path)
    kind, _, model = models[0]
    assert kind == "persistence"
    windows = np.random.default_rng(0).normal(size=(4, 3, 7))
    np.testing.assert_array_equal(predict_batch(model, windows), windows[:, -1, 0])


def test_forecast_horizon_shapes(small_dataset):
    configs = [small_config(3), small_config(5)]
    run = run_genhyb_ensemble(small_dataset, configs, 17)
    result = forecast_horizon(small_dataset, run.base_runs, run.weights, horizon=24)
    assert len(result.y_pred) == 24
    assert result.y_true is not None and len(result.y_true) == 24
    assert result.horizon == "24h"
