import numpy as np
import pytest

from qforecast.data import (
    destandardize_temperature,
    make_windows,
    prepare_dataset,
    synth_series,
)
from qforecast.errors import ConfigurationError, MetricUndefinedError, ShapeError
from qforecast.metrics import (
    ForecastResult,
    SequencePredictor,
    forecast_iterative,
    forecast_to_tsv,
    format_metrics_table,
    mape,
    mape_with_exclusions,
    mse,
)
from qforecast.qlstm import HyperConfig, forward_sequence, init_classical_lstm, train


# ---------------------------------------------------------------------------
# MAPE / MSE
# ---------------------------------------------------------------------------


def test_perfect_predictions():
    y = np.array([3.0, -2.0, 8.0])
    assert mape(y, y) == 0.0
    assert mse(y, y) == 0.0


def test_mape_hand_value():
    assert mape([100.0], [110.0]) == pytest.approx(10.0, abs=1e-12)


def test_mape_matches_loop_oracle():
    rng = np.random.default_rng(0)
    y = rng.normal(scale=10, size=1000)
    y[np.abs(y) < 1e-6] = 1.0  # keep every pair in range for the oracle
    yh = y + rng.normal(size=1000)
    total = 0.0
    for a, b in zip(y, yh):
        total += abs(a - b) / abs(a)
    want = 100.0 * total / 1000
    assert mape(y, yh) == pytest.approx(want, abs=1e-12)


def test_mape_exclusions_counted():
    y = np.array([0.0, 2.0, 1e-12, 4.0])
    yh = np.array([1.0, 2.2, 5.0, 4.4])
    value, excluded = mape_with_exclusions(y, yh)
    assert excluded == 2
    assert value == pytest.approx(100.0 * (0.2 / 2.0 + 0.4 / 4.0) / 2, abs=1e-12)


def test_mape_all_excluded_is_undefined():
    with pytest.raises(MetricUndefinedError):
        mape([0.0, 1e-10], [1.0, 1.0])


def test_mape_scale_invariance():
    rng = np.random.default_rng(3)
    y = rng.uniform(1.0, 10.0, size=200)
    yh = y + rng.normal(size=200)
    base = mape(y, yh)
    for c in (0.5, 3.0, 117.0):
        assert mape(c * y, c * yh) == pytest.approx(base, abs=1e-12)


def test_mse_hand_value():
    assert mse([0.0, 0.0], [1.0, -1.0]) == 1.0


def test_mse_translation_invariance():
    rng = np.random.default_rng(5)
    y = rng.normal(size=100)
    yh = y + rng.normal(size=100)
    base = mse(y, yh)
    for c in rng.normal(scale=50, size=5):
        assert mse(y + c, yh + c) == pytest.approx(base, abs=1e-12)


def test_mse_convex_under_ensembling():
    rng = np.random.default_rng(6)
    y = rng.normal(size=80)
    preds = y[None, :] + rng.normal(scale=0.5, size=(3, 80))
    for _ in range(30):
        raw = rng.uniform(0, 1, size=3)
        w = raw / raw.sum()
        lhs = mse(y, w @ preds)
        rhs = sum(wi * mse(y, p) for wi, p in zip(w, preds))
        assert lhs <= rhs + 1e-12


def test_length_mismatch():
    with pytest.raises(ShapeError):
        mse([1.0], [1.0, 2.0])
    with pytest.raises(ShapeError):
        mape([1.0], [1.0, 2.0])


# ---------------------------------------------------------------------------
# Iterative forecasting
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def trained_fixture():
    """A univariate model trained tightly on a noiseless periodic series.

    Feedback forecasting holds exogenous features at their last observed
    values, so the fixture model sees the temperature column alone; its
    whole input then evolves coherently during the rollout.
    """
    records = synth_series(
        700, seed=21, noise_sigma=0.0, annual_amplitude=0.0,
        base_temperature=15.0, daily_amplitude=5.0,
    )
    dataset = prepare_dataset(records)
    cfg = HyperConfig(0.02, 1, 2, 8, 5, 32, 60)
    windows = make_windows(dataset.train_matrix[:, :1], cfg.sequence_length)
    split = int(0.9 * len(windows))
    train_part = (windows.inputs[:split], windows.targets[:split])
    val_part = (windows.inputs[split:], windows.targets[split:])
    model = init_classical_lstm(cfg, input_dim=1, seed=77)
    train(model, cfg, train_part, val_part, seed=77)
    return dataset, cfg, model


def test_horizon_one_equals_single_forward(trained_fixture):
    dataset, cfg, model = trained_fixture
    context = dataset.test_matrix[: cfg.sequence_length, :1]
    predictor = SequencePredictor(cfg.sequence_length, lambda w: forward_sequence(model, w))
    result = forecast_iterative([predictor], [1.0], context, dataset.scaler, horizon=1)
    direct = forward_sequence(model, context[-cfg.sequence_length :])
    want = destandardize_temperature(np.array([direct]), dataset.scaler)[0]
    assert result.y_pred[0] == pytest.approx(want, abs=1e-12)


def test_24h_forecast_on_periodic_fixture(trained_fixture):
    dataset, cfg, model = trained_fixture
    seq = cfg.sequence_length
    context = dataset.test_matrix[:seq, :1]
    future = dataset.test_matrix[seq : seq + 24, 0]
    predictor = SequencePredictor(seq, lambda w: forward_sequence(model, w))
    result = forecast_iterative(
        [predictor], [1.0], context, dataset.scaler, horizon=24, true_future=future
    )
    assert result.horizon == "24h"
    assert mape(result.y_true, result.y_pred) < 5.0


def test_teacher_forcing_beats_autoregression(trained_fixture):
    dataset, cfg, model = trained_fixture
    seq = cfg.sequence_length
    context = dataset.test_matrix[:seq, :1]
    future = dataset.test_matrix[seq : seq + 24, 0]
    predictor = SequencePredictor(seq, lambda w: forward_sequence(model, w))
    free = forecast_iterative(
        [predictor], [1.0], context, dataset.scaler, horizon=24, true_future=future
    )
    forced = forecast_iterative(
        [predictor], [1.0], context, dataset.scaler, horizon=24,
        true_future=future, teacher_forcing=True,
    )
    assert mape(forced.y_true, forced.y_pred) <= mape(free.y_true, free.y_pred)


def test_bad_horizon():
    predictor = SequencePredictor(2, lambda w: 0.0)
    with pytest.raises(ConfigurationError):
        forecast_iterative([predictor], [1.0], np.zeros((3, 7)), _dummy_scaler(), horizon=0)


def _dummy_scaler():
    from qforecast.data import ScalerState

    n = 7
    return ScalerState(
        median=np.zeros(n), q1=np.zeros(n), q3=np.ones(n),
        mean=np.zeros(n), std=np.ones(n),
        robust_skip=np.zeros(n, dtype=bool), z_skip=np.zeros(n, dtype=bool),
        n_fit_rows=10,
    )


# ---------------------------------------------------------------------------
# Emission formats
# ---------------------------------------------------------------------------


def test_forecast_tsv_layout():
    res = ForecastResult(
        timestamps=[1, 2], y_true=np.array([1.0, 2.0]), y_pred=np.array([1.5, 2.5]),
        model="demo", horizon="2-step",
    )
    text = forecast_to_tsv([res])
    lines = text.strip().split("\n")
    assert lines[0] == "timestamp\ty_true\ty_pred\tmodel"
    assert lines[1] == "1\t1\t1.5\tdemo"


def test_metrics_table_row_order():
    rows = [
        {"model": "base-0", "mape_pct": 1.0, "mse": 0.5, "excluded": 0},
        {"model": "ensemble", "mape_pct": 0.9, "mse": 0.4, "excluded": 1},
    ]
    text = format_metrics_table(rows)
    lines = text.strip().split("\n")
    assert lines[2].startswith("base-0")
    assert lines[3].startswith("ensemble")
