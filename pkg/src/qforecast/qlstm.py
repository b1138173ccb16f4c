"""Quantum LSTM cell, classical LSTM baseline, and a shared training loop.

The quantum cell replaces the six internal transformations of an LSTM with
variational circuit blocks.  Because circuit readouts live in qubit-count
dimensions while the hidden state does not, trainable linear projections
bridge the two: one maps ``concat(h, x)`` down to circuit inputs, and two
map circuit readouts up to the hidden state and the scalar prediction.
The cell state itself lives in qubit-count dimensions.

Gradients flow through the full unrolled sequence; circuit angles get exact
parameter-shift gradients, everything classical is analytic backprop.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass

import numpy as np

from .errors import (
    CheckpointVersionError,
    ConfigurationError,
    NumericDivergenceError,
    NumericError,
    ShapeError,
)
from .quantum import VQCBlock, run_vqc_batch, vqc_gradients_batch

DEFAULT_LR_BOUNDS = (1e-4, 0.2)
CHECKPOINT_VERSION = 1

GATE_NAMES = ("forget", "input", "update", "output", "hidden", "readout")


@dataclass(frozen=True)
class HyperConfig:
    """One point in hyperparameter space."""

    learning_rate: float
    n_layers: int
    n_qubits: int
    hidden_units: int
    sequence_length: int
    batch_size: int
    epochs: int

    def validate(self, lr_bounds: tuple[float, float] | None = None) -> "HyperConfig":
        # lr_bounds is the tuning box; training itself only needs a finite,
        # non-negative rate (zero disables updates, which is legal)
        if not np.isfinite(self.learning_rate) or self.learning_rate < 0:
            raise ConfigurationError("learning_rate must be finite and >= 0")
        if lr_bounds is not None:
            lo, hi = lr_bounds
            if not (lo <= self.learning_rate <= hi):
                raise ConfigurationError(
                    f"learning_rate {self.learning_rate} outside [{lo}, {hi}]"
                )
        if self.n_layers < 1:
            raise ConfigurationError(f"n_layers must be >= 1, got {self.n_layers}")
        if not 2 <= self.n_qubits <= 10:
            raise ConfigurationError(f"n_qubits must be in [2, 10], got {self.n_qubits}")
        if self.hidden_units < 1:
            raise ConfigurationError(f"hidden_units must be >= 1, got {self.hidden_units}")
        if self.sequence_length < 1:
            raise ConfigurationError(f"sequence_length must be >= 1, got {self.sequence_length}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be >= 1, got {self.epochs}")
        return self

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "n_layers": self.n_layers,
            "n_qubits": self.n_qubits,
            "hidden_units": self.hidden_units,
            "sequence_length": self.sequence_length,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HyperConfig":
        return cls(
            learning_rate=float(d["learning_rate"]),
            n_layers=int(d["n_layers"]),
            n_qubits=int(d["n_qubits"]),
            hidden_units=int(d["hidden_units"]),
            sequence_length=int(d["sequence_length"]),
            batch_size=int(d["batch_size"]),
            epochs=int(d["epochs"]),
        )


@dataclass
class TrainReport:
    """Per-epoch loss curves for one training run."""

    train_losses: list
    test_losses: list
    final_val_loss: float
    wall_seconds: float


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _as_xy(dataset):
    if hasattr(dataset, "inputs") and hasattr(dataset, "targets"):
        return np.asarray(dataset.inputs, float), np.asarray(dataset.targets, float)
    x, y = dataset
    return np.asarray(x, float), np.asarray(y, float)


# ---------------------------------------------------------------------------
# Quantum LSTM
# ---------------------------------------------------------------------------


@dataclass
class QLSTMParams:
    """Six circuit blocks plus the classical bridging projections."""

    vqc: tuple  # six VQCBlock instances, order matching GATE_NAMES
    w_in: np.ndarray  # (n_qubits, hidden_units + input_dim)
    b_in: np.ndarray  # (n_qubits,)
    w_h: np.ndarray  # (hidden_units, n_qubits)
    b_h: np.ndarray  # (hidden_units,)
    w_y: np.ndarray  # (output_dim, n_qubits)
    b_y: np.ndarray  # (output_dim,)
    hidden_units: int
    input_dim: int

    def __post_init__(self):
        if len(self.vqc) != 6:
            raise ShapeError(f"expected 6 circuit blocks, got {len(self.vqc)}")
        n = self.vqc[0].n_qubits
        layers = self.vqc[0].n_layers
        for block in self.vqc:
            if block.n_qubits != n or block.n_layers != layers:
                raise ShapeError("all six circuit blocks must share n_qubits and n_layers")
        if self.w_in.shape != (n, self.hidden_units + self.input_dim):
            raise ShapeError(f"w_in has shape {self.w_in.shape}")
        if self.w_h.shape != (self.hidden_units, n):
            raise ShapeError(f"w_h has shape {self.w_h.shape}")
        if self.w_y.shape[1] != n:
            raise ShapeError(f"w_y has shape {self.w_y.shape}")

    @property
    def n_qubits(self) -> int:
        return self.vqc[0].n_qubits

    @property
    def output_dim(self) -> int:
        return self.w_y.shape[0]

    def param_arrays(self) -> dict:
        out = {f"theta_{name}": blk.thetas for name, blk in zip(GATE_NAMES, self.vqc)}
        out.update(
            w_in=self.w_in, b_in=self.b_in, w_h=self.w_h, b_h=self.b_h,
            w_y=self.w_y, b_y=self.b_y,
        )
        return out

    # -- forward -----------------------------------------------------------

    def step_batch(self, x_t, h_prev, c_prev, *, want_y: bool):
        """One cell step over a batch; returns (h, c, y, cache)."""
        concat = np.concatenate([h_prev, x_t], axis=1)
        v = concat @ self.w_in.T + self.b_in
        f = _sigmoid(run_vqc_batch(self.vqc[0], v))
        i = _sigmoid(run_vqc_batch(self.vqc[1], v))
        g = np.tanh(run_vqc_batch(self.vqc[2], v))
        o = _sigmoid(run_vqc_batch(self.vqc[3], v))
        c = f * c_prev + i * g
        tc = np.tanh(c)
        u = o * tc
        z5 = run_vqc_batch(self.vqc[4], u)
        h = z5 @ self.w_h.T + self.b_h
        y = None
        if want_y:
            z6 = run_vqc_batch(self.vqc[5], u)
            y = z6 @ self.w_y.T + self.b_y
        cache = {
            "concat": concat, "v": v, "f": f, "i": i, "g": g, "o": o,
            "c_prev": c_prev, "c": c, "tc": tc, "u": u, "z5": z5,
            "z6": None if not want_y else z6,
        }
        return h, c, y, cache

    def forward_batch(self, windows, need_cache: bool = False):
        """Run full sequences; returns final predictions (batch,) and caches."""
        windows = np.asarray(windows, dtype=float)
        if windows.ndim != 3 or windows.shape[2] != self.input_dim:
            raise ShapeError(
                f"windows must have shape (batch, seq, {self.input_dim}), got {windows.shape}"
            )
        batch, seq = windows.shape[0], windows.shape[1]
        h = np.zeros((batch, self.hidden_units))
        c = np.zeros((batch, self.n_qubits))
        caches = []
        y = None
        for t in range(seq):
            h, c, y, cache = self.step_batch(windows[:, t, :], h, c, want_y=(t == seq - 1))
            if need_cache:
                caches.append(cache)
        return y[:, 0], caches

    # -- backward ------------------------------------------------------------

    def backward(self, caches, dpred):
        """BPTT through cached steps; ``dpred`` is (batch,) loss gradient on y."""
        seq = len(caches)
        grads = {k: np.zeros_like(v) for k, v in self.param_arrays().items()}
        dy = dpred[:, None]
        final = caches[-1]
        grads["w_y"] += dy.T @ final["z6"]
        grads["b_y"] += dy.sum(axis=0)
        dz6 = dy @ self.w_y

        batch = dpred.shape[0]
        dh = np.zeros((batch, self.hidden_units))
        dc_carry = np.zeros((batch, self.n_qubits))
        for t in range(seq - 1, -1, -1):
            cache = caches[t]
            du = np.zeros((batch, self.n_qubits))
            if t == seq - 1:
                tg, ig = vqc_gradients_batch(self.vqc[5], cache["u"], dz6)
                grads["theta_readout"] += tg
                du += ig
            if np.any(dh):
                dz5 = dh @ self.w_h
                grads["w_h"] += dh.T @ cache["z5"]
                grads["b_h"] += dh.sum(axis=0)
                tg, ig = vqc_gradients_batch(self.vqc[4], cache["u"], dz5)
                grads["theta_hidden"] += tg
                du += ig
            o, tc, f, i, g = cache["o"], cache["tc"], cache["f"], cache["i"], cache["g"]
            dc = dc_carry + du * o * (1.0 - tc * tc)
            do = du * tc
            dz4 = do * o * (1.0 - o)
            df = dc * cache["c_prev"]
            dz1 = df * f * (1.0 - f)
            di = dc * g
            dz2 = di * i * (1.0 - i)
            dg = dc * i
            dz3 = dg * (1.0 - g * g)
            dc_carry = dc * f

            dv = np.zeros((batch, self.n_qubits))
            for blk, key, dz in (
                (self.vqc[0], "theta_forget", dz1),
                (self.vqc[1], "theta_input", dz2),
                (self.vqc[2], "theta_update", dz3),
                (self.vqc[3], "theta_output", dz4),
            ):
                tg, ig = vqc_gradients_batch(blk, cache["v"], dz)
                grads[key] += tg
                dv += ig
            grads["w_in"] += dv.T @ cache["concat"]
            grads["b_in"] += dv.sum(axis=0)
            dh = (dv @ self.w_in)[:, : self.hidden_units]
        return grads


def init_qlstm(config: HyperConfig, input_dim: int, seed, output_dim: int = 1) -> QLSTMParams:
    """Seeded initialization: projections uniform in [-0.1, 0.1] (zero biases),
    circuit angles uniform in [-pi, pi]."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n, hidden = config.n_qubits, config.hidden_units
    blocks = tuple(VQCBlock.random(n, config.n_layers, rng) for _ in range(6))
    return QLSTMParams(
        vqc=blocks,
        w_in=rng.uniform(-0.1, 0.1, size=(n, hidden + input_dim)),
        b_in=np.zeros(n),
        w_h=rng.uniform(-0.1, 0.1, size=(hidden, n)),
        b_h=np.zeros(hidden),
        w_y=rng.uniform(-0.1, 0.1, size=(output_dim, n)),
        b_y=np.zeros(output_dim),
        hidden_units=hidden,
        input_dim=input_dim,
    )


def qlstm_step(params: QLSTMParams, x_t, h_prev, c_prev):
    """Single cell step.

    Returns ``(h_t, c_t, y_t)`` with shapes ``(hidden_units,)``,
    ``(n_qubits,)`` (the cell state lives in qubit-count dimensions) and
    ``(output_dim,)``.  Gate activations are sigmoids/tanh of circuit
    readouts, so forget/input/output gates lie in (0, 1) and the candidate
    update in (-1, 1).
    """
    x_t = np.asarray(x_t, dtype=float)
    h_prev = np.asarray(h_prev, dtype=float)
    c_prev = np.asarray(c_prev, dtype=float)
    if x_t.shape != (params.input_dim,):
        raise ShapeError(f"x_t must have {params.input_dim} entries, got {x_t.shape}")
    if h_prev.shape != (params.hidden_units,):
        raise ShapeError(f"h_prev must have {params.hidden_units} entries, got {h_prev.shape}")
    if c_prev.shape != (params.n_qubits,):
        raise ShapeError(f"c_prev must have {params.n_qubits} entries, got {c_prev.shape}")
    for arr in (x_t, h_prev, c_prev):
        if not np.all(np.isfinite(arr)):
            raise NumericError("cell step received non-finite values")
    h, c, y, _ = params.step_batch(x_t[None], h_prev[None], c_prev[None], want_y=True)
    return h[0], c[0], y[0]


def forward_sequence(params: QLSTMParams, window) -> float:
    """Run the cell over one window from zero state; returns the final prediction."""
    window = np.asarray(window, dtype=float)
    if window.ndim != 2 or window.shape[1] != params.input_dim:
        raise ShapeError(f"window must be (seq, {params.input_dim}), got {window.shape}")
    pred, _ = params.forward_batch(window[None])
    return float(pred[0])


def predict_batch(params, windows) -> np.ndarray:
    """Predictions for a stack of windows (works for both cell types)."""
    preds, _ = params.forward_batch(np.asarray(windows, dtype=float))
    return preds


# ---------------------------------------------------------------------------
# Classical LSTM baseline (same hidden size, affine gates)
# ---------------------------------------------------------------------------


@dataclass
class ClassicalLSTMParams:
    w_f: np.ndarray
    b_f: np.ndarray
    w_i: np.ndarray
    b_i: np.ndarray
    w_g: np.ndarray
    b_g: np.ndarray
    w_o: np.ndarray
    b_o: np.ndarray
    w_y: np.ndarray
    b_y: np.ndarray
    hidden_units: int
    input_dim: int

    def param_arrays(self) -> dict:
        return {
            "w_f": self.w_f, "b_f": self.b_f, "w_i": self.w_i, "b_i": self.b_i,
            "w_g": self.w_g, "b_g": self.b_g, "w_o": self.w_o, "b_o": self.b_o,
            "w_y": self.w_y, "b_y": self.b_y,
        }

    def forward_batch(self, windows, need_cache: bool = False):
        windows = np.asarray(windows, dtype=float)
        if windows.ndim != 3 or windows.shape[2] != self.input_dim:
            raise ShapeError(f"windows must be (batch, seq, {self.input_dim})")
        batch, seq = windows.shape[0], windows.shape[1]
        h = np.zeros((batch, self.hidden_units))
        c = np.zeros((batch, self.hidden_units))
        caches = []
        for t in range(seq):
            concat = np.concatenate([h, windows[:, t, :]], axis=1)
            f = _sigmoid(concat @ self.w_f.T + self.b_f)
            i = _sigmoid(concat @ self.w_i.T + self.b_i)
            g = np.tanh(concat @ self.w_g.T + self.b_g)
            o = _sigmoid(concat @ self.w_o.T + self.b_o)
            c_new = f * c + i * g
            tc = np.tanh(c_new)
            h_new = o * tc
            if need_cache:
                caches.append(
                    {"concat": concat, "f": f, "i": i, "g": g, "o": o,
                     "c_prev": c, "c": c_new, "tc": tc, "h": h_new}
                )
            h, c = h_new, c_new
        y = h @ self.w_y.T + self.b_y
        if need_cache:
            caches[-1]["h_final"] = h
        return y[:, 0], caches

    def backward(self, caches, dpred):
        grads = {k: np.zeros_like(v) for k, v in self.param_arrays().items()}
        dy = dpred[:, None]
        grads["w_y"] += dy.T @ caches[-1]["h_final"]
        grads["b_y"] += dy.sum(axis=0)
        dh = dy @ self.w_y
        batch = dpred.shape[0]
        dc_carry = np.zeros((batch, self.hidden_units))
        for t in range(len(caches) - 1, -1, -1):
            cache = caches[t]
            f, i, g, o, tc = cache["f"], cache["i"], cache["g"], cache["o"], cache["tc"]
            dc = dc_carry + dh * o * (1.0 - tc * tc)
            do = dh * tc
            dzo = do * o * (1.0 - o)
            df = dc * cache["c_prev"]
            dzf = df * f * (1.0 - f)
            di = dc * g
            dzi = di * i * (1.0 - i)
            dg = dc * i
            dzg = dg * (1.0 - g * g)
            dc_carry = dc * f
            concat = cache["concat"]
            grads["w_f"] += dzf.T @ concat
            grads["b_f"] += dzf.sum(axis=0)
            grads["w_i"] += dzi.T @ concat
            grads["b_i"] += dzi.sum(axis=0)
            grads["w_g"] += dzg.T @ concat
            grads["b_g"] += dzg.sum(axis=0)
            grads["w_o"] += dzo.T @ concat
            grads["b_o"] += dzo.sum(axis=0)
            da = dzf @ self.w_f + dzi @ self.w_i + dzg @ self.w_g + dzo @ self.w_o
            dh = da[:, : self.hidden_units]
        return grads


def init_classical_lstm(config: HyperConfig, input_dim: int, seed, output_dim: int = 1):
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    hidden = config.hidden_units
    shape = (hidden, hidden + input_dim)

    def w():
        return rng.uniform(-0.1, 0.1, size=shape)

    return ClassicalLSTMParams(
        w_f=w(), b_f=np.zeros(hidden),
        w_i=w(), b_i=np.zeros(hidden),
        w_g=w(), b_g=np.zeros(hidden),
        w_o=w(), b_o=np.zeros(hidden),
        w_y=rng.uniform(-0.1, 0.1, size=(output_dim, hidden)),
        b_y=np.zeros(output_dim),
        hidden_units=hidden,
        input_dim=input_dim,
    )


@dataclass
class PersistenceModel:
    """Trivial baseline: predict the last observed (standardized) temperature."""

    input_dim: int
    temperature_col: int = 0

    def param_arrays(self) -> dict:
        return {}

    def forward_batch(self, windows, need_cache: bool = False):
        windows = np.asarray(windows, dtype=float)
        if windows.ndim != 3 or windows.shape[2] != self.input_dim:
            raise ShapeError(f"windows must be (batch, seq, {self.input_dim})")
        return windows[:, -1, self.temperature_col].copy(), []


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


class Adam:
    """Adam with the conventional (0.9, 0.999, 1e-8) moment settings."""

    def __init__(self, params: dict, learning_rate: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = learning_rate
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, grads: dict) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for key in self.params:
            grad = grads[key]
            self.m[key] = b1 * self.m[key] + (1 - b1) * grad
            self.v[key] = b2 * self.v[key] + (1 - b2) * grad * grad
            m_hat = self.m[key] / (1 - b1**self.t)
            v_hat = self.v[key] / (1 - b2**self.t)
            self.params[key] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def mse_on(model, dataset) -> float:
    x, y = _as_xy(dataset)
    preds, _ = model.forward_batch(x)
    return float(np.mean((preds - y) ** 2))


def train(model, config: HyperConfig, train_set, test_set, seed) -> TrainReport:
    """Minimize MSE by minibatch Adam over ``config.epochs`` epochs.

    Deterministic for a fixed seed: batch shuffling is the only source of
    randomness.  A non-finite loss raises
    :class:`~qforecast.errors.NumericDivergenceError` with the offending
    epoch in the message.
    """
    config.validate()
    x_train, y_train = _as_xy(train_set)
    x_test, y_test = _as_xy(test_set)
    if len(x_train) == 0 or len(x_test) == 0:
        raise ConfigurationError("train and test sets must be non-empty")
    if x_train.shape[1] != config.sequence_length:
        raise ConfigurationError(
            f"dataset windows have length {x_train.shape[1]}, "
            f"config expects {config.sequence_length}"
        )
    rng = np.random.default_rng(seed)
    opt = Adam(model.param_arrays(), config.learning_rate)
    n = len(x_train)
    batch_size = min(config.batch_size, n)

    start = time.perf_counter()
    train_losses, test_losses = [], []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        # per-window squared errors are summed in window order, so the
        # epoch loss does not depend on the shuffle
        sq_errors = np.empty(n)
        try:
            for lo in range(0, n, batch_size):
                idx = order[lo : lo + batch_size]
                xb, yb = x_train[idx], y_train[idx]
                preds, caches = model.forward_batch(xb, need_cache=True)
                err = preds - yb
                sq_errors[idx] = err * err
                grads = model.backward(caches, 2.0 * err / len(idx))
                opt.step(grads)
        except NumericError as exc:
            # exploded parameters feed non-finite values back into the cell
            raise NumericDivergenceError(f"training diverged at epoch {epoch}: {exc}") from exc
        epoch_train = float(np.sum(sq_errors)) / n
        if not np.isfinite(epoch_train):
            raise NumericDivergenceError(f"training loss diverged at epoch {epoch}")
        epoch_test = mse_on(model, (x_test, y_test))
        if not np.isfinite(epoch_test):
            raise NumericDivergenceError(f"test loss diverged at epoch {epoch}")
        train_losses.append(epoch_train)
        test_losses.append(epoch_test)
    return TrainReport(
        train_losses=train_losses,
        test_losses=test_losses,
        final_val_loss=test_losses[-1],
        wall_seconds=time.perf_counter() - start,
    )


def classical_lstm_train(model, config, train_set, test_set, seed) -> TrainReport:
    """Identical training contract for the classical baseline cell."""
    if not isinstance(model, ClassicalLSTMParams):
        raise ConfigurationError("classical_lstm_train expects a ClassicalLSTMParams model")
    return train(model, config, train_set, test_set, seed)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(path, model, config: HyperConfig) -> None:
    """Write a versioned checkpoint; the write/read round-trip is exact."""
    payload = {"version": np.array(CHECKPOINT_VERSION)}
    if isinstance(model, QLSTMParams):
        payload["kind"] = np.array("qlstm")
        for name, blk in zip(GATE_NAMES, model.vqc):
            payload[f"theta_{name}"] = blk.thetas
        for key in ("w_in", "b_in", "w_h", "b_h", "w_y", "b_y"):
            payload[key] = getattr(model, key)
    elif isinstance(model, ClassicalLSTMParams):
        payload["kind"] = np.array("lstm")
        payload.update(model.param_arrays())
    else:
        raise ConfigurationError(f"cannot checkpoint model of type {type(model).__name__}")
    payload["config_json"] = np.array(json.dumps(config.to_dict(), sort_keys=True))
    payload["input_dim"] = np.array(model.input_dim)
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_checkpoint(path):
    """Read a checkpoint back; returns ``(model, config)``."""
    with np.load(path, allow_pickle=False) as data:
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise CheckpointVersionError(
                f"checkpoint version {version} unsupported (expected {CHECKPOINT_VERSION})"
            )
        kind = str(data["kind"])
        config = HyperConfig.from_dict(json.loads(str(data["config_json"])))
        input_dim = int(data["input_dim"])
        if kind == "qlstm":
            blocks = tuple(
                VQCBlock(config.n_qubits, config.n_layers, data[f"theta_{name}"])
                for name in GATE_NAMES
            )
            model = QLSTMParams(
                vqc=blocks,
                w_in=data["w_in"], b_in=data["b_in"],
                w_h=data["w_h"], b_h=data["b_h"],
                w_y=data["w_y"], b_y=data["b_y"],
                hidden_units=config.hidden_units,
                input_dim=input_dim,
            )
        elif kind == "lstm":
            model = ClassicalLSTMParams(
                w_f=data["w_f"], b_f=data["b_f"], w_i=data["w_i"], b_i=data["b_i"],
                w_g=data["w_g"], b_g=data["b_g"], w_o=data["w_o"], b_o=data["b_o"],
                w_y=data["w_y"], b_y=data["b_y"],
                hidden_units=config.hidden_units,
                input_dim=input_dim,
            )
        else:
            raise CheckpointVersionError(f"unknown checkpoint kind {kind!r}")
    return model, config
