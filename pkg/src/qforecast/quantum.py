"""Exact statevector simulation of small variational quantum circuits.

Pure-numpy simulator for the circuit blocks used inside the quantum LSTM
cell: an angle-encoding layer, ring entanglement, trainable single-qubit
rotations, and Pauli-Z expectation readout.  Gradients with respect to the
rotation angles use the parameter-shift rule (two evaluations at theta
plus/minus pi/2), which is exact for this gate set.

Conventions
-----------
* Qubit 0 is the least-significant bit of the amplitude index.
* States are always normalized; every public gate application checks the
  norm to 1e-10.
* Simulation is exact (no shot sampling), so all outputs are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidGateError, NumericError, ShapeError

MAX_QUBITS = 10
NORM_TOL = 1e-10

ROTATION_KINDS = ("rx", "ry", "rz")
GATE_KINDS = ROTATION_KINDS + ("h", "cnot")


@dataclass(frozen=True)
class StateVector:
    """An n-qubit pure state as 2**n complex amplitudes."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise ShapeError(f"n_qubits must be in [1, {MAX_QUBITS}], got {self.n_qubits}")
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (2**self.n_qubits,):
            raise ShapeError(
                f"expected {2**self.n_qubits} amplitudes for {self.n_qubits} qubits, "
                f"got shape {amps.shape}"
            )
        norm_sq = float(np.sum(amps.real**2 + amps.imag**2))
        if abs(norm_sq - 1.0) > NORM_TOL:
            raise NumericError(f"state norm**2 = {norm_sq!r} deviates from 1 beyond {NORM_TOL}")
        object.__setattr__(self, "amplitudes", amps)

    def probabilities(self) -> np.ndarray:
        a = self.amplitudes
        return a.real**2 + a.imag**2


def zero_state(n_qubits: int) -> StateVector:
    """|0...0> on ``n_qubits`` qubits."""
    amps = np.zeros(2**n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(n_qubits, amps)


@dataclass(frozen=True)
class Gate:
    """A single circuit gate.

    ``kind`` is one of ``rx``/``ry``/``rz`` (needs ``angle``), ``h``, or
    ``cnot`` (needs ``control``).
    """

    kind: str
    target: int
    control: int | None = None
    angle: float | None = None

    def validate_for(self, n_qubits: int) -> None:
        if self.kind not in GATE_KINDS:
            raise InvalidGateError(f"unknown gate kind {self.kind!r}")
        if not 0 <= self.target < n_qubits:
            raise InvalidGateError(f"target {self.target} out of range for {n_qubits} qubits")
        if self.kind == "cnot":
            if self.control is None:
                raise InvalidGateError("cnot requires a control qubit")
            if not 0 <= self.control < n_qubits:
                raise InvalidGateError(
                    f"control {self.control} out of range for {n_qubits} qubits"
                )
            if self.control == self.target:
                raise InvalidGateError("cnot control and target must differ")
        elif self.control is not None:
            raise InvalidGateError(f"{self.kind} gate takes no control qubit")
        if self.kind in ROTATION_KINDS:
            if self.angle is None or not np.isfinite(self.angle):
                raise InvalidGateError(f"{self.kind} gate requires a finite angle")
        elif self.angle is not None:
            raise InvalidGateError(f"{self.kind} gate takes no angle")


# ---------------------------------------------------------------------------
# Batched kernels.  All operate on arrays of shape (batch, 2**n) and return
# new arrays; the batch axis lets one call simulate many circuits at once.
# ---------------------------------------------------------------------------


def _as_broadcast(angle_term, batched: bool):
    # scalar stays scalar; per-batch (B,) vectors broadcast over (B, pre, post)
    if batched:
        return angle_term[:, None, None]
    return angle_term


def _apply_rotation(amps: np.ndarray, n: int, kind: str, target: int, angle) -> np.ndarray:
    batch = amps.shape[0]
    pre = 2 ** (n - 1 - target)
    post = 2**target
    a = amps.reshape(batch, pre, 2, post)
    a0 = a[:, :, 0, :]
    a1 = a[:, :, 1, :]
    angle = np.asarray(angle, dtype=np.float64)
    batched = angle.ndim == 1
    half = angle * 0.5
    c = _as_broadcast(np.cos(half), batched)
    s = _as_broadcast(np.sin(half), batched)
    out = np.empty_like(a)
    if kind == "rx":
        out[:, :, 0, :] = c * a0 - 1j * s * a1
        out[:, :, 1, :] = -1j * s * a0 + c * a1
    elif kind == "ry":
        out[:, :, 0, :] = c * a0 - s * a1
        out[:, :, 1, :] = s * a0 + c * a1
    elif kind == "rz":
        out[:, :, 0, :] = (c - 1j * s) * a0
        out[:, :, 1, :] = (c + 1j * s) * a1
    else:  # pragma: no cover - guarded by callers
        raise InvalidGateError(f"not a rotation gate: {kind!r}")
    return out.reshape(batch, -1)


def _apply_h(amps: np.ndarray, n: int, target: int) -> np.ndarray:
    batch = amps.shape[0]
    pre = 2 ** (n - 1 - target)
    post = 2**target
    a = amps.reshape(batch, pre, 2, post)
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    out = np.empty_like(a)
    out[:, :, 0, :] = (a[:, :, 0, :] + a[:, :, 1, :]) * inv_sqrt2
    out[:, :, 1, :] = (a[:, :, 0, :] - a[:, :, 1, :]) * inv_sqrt2
    return out.reshape(batch, -1)


@lru_cache(maxsize=None)
def _cnot_perm(n: int, control: int, target: int) -> np.ndarray:
    idx = np.arange(2**n)
    return idx ^ (((idx >> control) & 1) << target)


def _apply_cnot(amps: np.ndarray, n: int, control: int, target: int) -> np.ndarray:
    return amps[:, _cnot_perm(n, control, target)]


@lru_cache(maxsize=None)
def _z_signs(n: int) -> np.ndarray:
    # row q holds +1/-1 for bit q of each basis index
    idx = np.arange(2**n)
    bits = (idx[None, :] >> np.arange(n)[:, None]) & 1
    return (1.0 - 2.0 * bits).astype(np.float64)


def _z_expectations(amps: np.ndarray, n: int) -> np.ndarray:
    probs = amps.real**2 + amps.imag**2
    return probs @ _z_signs(n).T


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    """Apply one gate, returning the unitarily evolved state.

    Pure: the input state is never mutated.  Raises
    :class:`~qforecast.errors.InvalidGateError` on bad qubit indices and
    :class:`~qforecast.errors.NumericError` if the norm drifts beyond 1e-10
    (cannot happen for valid gates; kept as a hard guard).
    """
    gate.validate_for(state.n_qubits)
    amps = state.amplitudes[None, :]
    if gate.kind in ROTATION_KINDS:
        amps = _apply_rotation(amps, state.n_qubits, gate.kind, gate.target, gate.angle)
    elif gate.kind == "h":
        amps = _apply_h(amps, state.n_qubits, gate.target)
    else:
        amps = _apply_cnot(amps, state.n_qubits, gate.control, gate.target)
    return StateVector(state.n_qubits, amps[0])


def inverse_gate(gate: Gate) -> Gate:
    """The inverse of ``gate`` (rotations negate their angle; H and CNOT are involutions)."""
    if gate.kind in ROTATION_KINDS:
        return Gate(gate.kind, gate.target, angle=-gate.angle)
    return gate


# ---------------------------------------------------------------------------
# Variational block: encoding + entangling/rotation layers + <Z> readout.
# ---------------------------------------------------------------------------


@dataclass
class VQCBlock:
    """A parameterized circuit block with trainable rotation angles.

    Structure: per-qubit angle encoding RY(arctan x_i) then RZ(arctan x_i^2),
    followed by ``n_layers`` of [CNOT ring entangler + per-qubit RX, RY, RZ
    with trainable angles].  Readout is the per-qubit Pauli-Z expectation,
    so outputs live in [-1, 1].  The expected input length is ``n_qubits``.
    """

    n_qubits: int
    n_layers: int
    thetas: np.ndarray  # shape (n_layers, n_qubits, 3)

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise ShapeError(f"n_qubits must be in [1, {MAX_QUBITS}], got {self.n_qubits}")
        if self.n_layers < 1:
            raise ShapeError(f"n_layers must be >= 1, got {self.n_layers}")
        thetas = np.asarray(self.thetas, dtype=np.float64)
        expected = (self.n_layers, self.n_qubits, 3)
        if thetas.shape != expected:
            raise ShapeError(f"thetas must have shape {expected}, got {thetas.shape}")
        if not np.all(np.isfinite(thetas)):
            raise NumericError("theta angles must all be finite")
        self.thetas = thetas

    @property
    def n_params(self) -> int:
        return self.thetas.size

    @classmethod
    def random(cls, n_qubits: int, n_layers: int, rng: np.random.Generator) -> "VQCBlock":
        thetas = rng.uniform(-np.pi, np.pi, size=(n_layers, n_qubits, 3))
        return cls(n_qubits, n_layers, thetas)

    @classmethod
    def zeros(cls, n_qubits: int, n_layers: int) -> "VQCBlock":
        return cls(n_qubits, n_layers, np.zeros((n_layers, n_qubits, 3)))


def encoding_angles(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map raw inputs to the (RY, RZ) encoding angles, elementwise."""
    x = np.asarray(x, dtype=np.float64)
    return np.arctan(x), np.arctan(x * x)


def _check_inputs(block: VQCBlock, x: np.ndarray, batched: bool) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    ok = x.shape == (x.shape[0], block.n_qubits) if batched and x.ndim == 2 else (
        not batched and x.shape == (block.n_qubits,)
    )
    if not ok:
        raise ShapeError(
            f"input must have {block.n_qubits} entries per circuit, got shape {x.shape}"
        )
    if not np.all(np.isfinite(x)):
        raise NumericError("circuit inputs must be finite")
    return x


def _run_block(block: VQCBlock, enc_ry: np.ndarray, enc_rz: np.ndarray, theta_of) -> np.ndarray:
    """Simulate the block for a batch of encodings; returns final amplitudes."""
    n = block.n_qubits
    batch = enc_ry.shape[0]
    amps = np.zeros((batch, 2**n), dtype=np.complex128)
    amps[:, 0] = 1.0
    for q in range(n):
        amps = _apply_rotation(amps, n, "ry", q, enc_ry[:, q])
        amps = _apply_rotation(amps, n, "rz", q, enc_rz[:, q])
    for layer in range(block.n_layers):
        if n >= 2:
            for q in range(n):
                amps = _apply_cnot(amps, n, q, (q + 1) % n)
        for q in range(n):
            amps = _apply_rotation(amps, n, "rx", q, theta_of(layer, q, 0))
            amps = _apply_rotation(amps, n, "ry", q, theta_of(layer, q, 1))
            amps = _apply_rotation(amps, n, "rz", q, theta_of(layer, q, 2))
    return amps


def run_vqc_batch(block: VQCBlock, inputs: np.ndarray) -> np.ndarray:
    """Run the block on a (batch, n_qubits) input matrix; returns (batch, n_qubits) <Z> values."""
    inputs = _check_inputs(block, inputs, batched=True)
    enc_ry, enc_rz = encoding_angles(inputs)
    amps = _run_block(block, enc_ry, enc_rz, lambda l, q, k: block.thetas[l, q, k])
    return _z_expectations(amps, block.n_qubits)


def run_vqc(block: VQCBlock, x: np.ndarray) -> np.ndarray:
    """Per-qubit Pauli-Z expectations of the block applied to one input vector."""
    x = _check_inputs(block, x, batched=False)
    return run_vqc_batch(block, x[None, :])[0]


# ---------------------------------------------------------------------------
# Parameter-shift gradients.
#
# Every shifted circuit is embedded in one large batch (two rows per shifted
# parameter per batch element), so a full gradient costs a single pass of
# vectorized gate applications instead of a Python loop over parameters.
# ---------------------------------------------------------------------------

_SHIFT = 0.5 * np.pi


def vqc_gradients_batch(
    block: VQCBlock,
    inputs: np.ndarray,
    upstream: np.ndarray,
    *,
    max_rows: int = 65536,
) -> tuple[np.ndarray, np.ndarray]:
    """Parameter-shift gradients of ``sum_b upstream_b . output_b``.

    Parameters
    ----------
    inputs : (batch, n_qubits) raw input matrix.
    upstream : (batch, n_qubits) cotangent for each circuit's output.

    Returns
    -------
    theta_grad : array with the shape of ``block.thetas`` (summed over batch).
    input_grad : (batch, n_qubits) gradient with respect to the raw inputs,
        obtained by shifting the encoding angles and applying the chain rule
        of the arctan encoding.
    """
    inputs = _check_inputs(block, inputs, batched=True)
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != inputs.shape:
        raise ShapeError(f"upstream must match inputs shape {inputs.shape}, got {upstream.shape}")

    n, layers = block.n_qubits, block.n_layers
    batch = inputs.shape[0]
    enc_ry0, enc_rz0 = encoding_angles(inputs)

    theta_blocks = [("theta", l, q, k) for l in range(layers) for q in range(n) for k in range(3)]
    enc_blocks = [("enc", q, slot) for slot in (0, 1) for q in range(n)]
    blocks = theta_blocks + enc_blocks

    theta_grad = np.zeros_like(block.thetas)
    enc_grad = np.zeros((2, batch, n))  # slot 0 = RY encoding angle, 1 = RZ

    chunk = max(1, max_rows // (2 * batch))
    for start in range(0, len(blocks), chunk):
        part = blocks[start : start + chunk]
        rows = 2 * len(part) * batch
        enc_ry = np.tile(enc_ry0, (2 * len(part), 1))
        enc_rz = np.tile(enc_rz0, (2 * len(part), 1))
        shifted_theta: dict[tuple[int, int, int], np.ndarray] = {}
        for i, blk in enumerate(part):
            plus = slice(2 * i * batch, 2 * i * batch + batch)
            minus = slice(2 * i * batch + batch, 2 * (i + 1) * batch)
            if blk[0] == "theta":
                _, l, q, k = blk
                angle = np.full(rows, block.thetas[l, q, k])
                angle[plus] += _SHIFT
                angle[minus] -= _SHIFT
                shifted_theta[(l, q, k)] = angle
            else:
                _, q, slot = blk
                target = enc_ry if slot == 0 else enc_rz
                target[plus, q] += _SHIFT
                target[minus, q] -= _SHIFT

        def theta_of(l, q, k):
            return shifted_theta.get((l, q, k), block.thetas[l, q, k])

        amps = _run_block(block, enc_ry, enc_rz, theta_of)
        z = _z_expectations(amps, n).reshape(len(part), 2, batch, n)
        # (parts, batch): contraction of the +/- difference with the upstream
        contrib = np.einsum("pbq,bq->pb", (z[:, 0] - z[:, 1]) * 0.5, upstream)
        for i, blk in enumerate(part):
            if blk[0] == "theta":
                _, l, q, k = blk
                theta_grad[l, q, k] = contrib[i].sum()
            else:
                _, q, slot = blk
                enc_grad[slot, :, q] = contrib[i]

    # chain rule through the encoding: a = arctan(x), b = arctan(x^2)
    x = inputs
    input_grad = enc_grad[0] / (1.0 + x * x) + enc_grad[1] * (2.0 * x) / (1.0 + x**4)
    return theta_grad, input_grad


def vqc_gradient(block: VQCBlock, x: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Gradient of ``upstream . run_vqc(block, x)`` with respect to the thetas."""
    x = _check_inputs(block, x, batched=False)
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != (block.n_qubits,):
        raise ShapeError(f"upstream must have {block.n_qubits} entries, got {upstream.shape}")
    theta_grad, _ = vqc_gradients_batch(block, x[None, :], upstream[None, :])
    return theta_grad


def vqc_input_gradient(block: VQCBlock, x: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Gradient of ``upstream . run_vqc(block, x)`` with respect to the input vector."""
    x = _check_inputs(block, x, batched=False)
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != (block.n_qubits,):
        raise ShapeError(f"upstream must have {block.n_qubits} entries, got {upstream.shape}")
    _, input_grad = vqc_gradients_batch(block, x[None, :], upstream[None, :])
    return input_grad[0]
