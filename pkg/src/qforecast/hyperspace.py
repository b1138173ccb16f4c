"""Hyperparameter search space shared by every tuner.

Tuners move through a continuous box; integer dimensions are rounded
half-up at decode time and the learning rate is searched in log10
coordinates.  A fixed-width binary codec maps genomes onto the same box so
the genetic and swarm phases optimize over identical territory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .qlstm import HyperConfig


@dataclass(frozen=True)
class Dimension:
    name: str
    low: float  # box coordinate (log10 domain when log10=True)
    high: float
    integer: bool = False
    log10: bool = False
    bits: int = 8

    def decode(self, coord: float) -> float | int:
        coord = min(max(coord, self.low), self.high)
        value = 10.0**coord if self.log10 else coord
        if self.integer:
            return int(math.floor(value + 0.5))
        return float(value)


def default_dimensions(
    lr_bounds: tuple[float, float] = (1e-4, 0.2),
    qubit_bounds: tuple[int, int] = (2, 6),
    layer_bounds: tuple[int, int] = (1, 3),
    hidden_bounds: tuple[int, int] = (2, 8),
    batch_bounds: tuple[int, int] = (16, 256),
) -> tuple[Dimension, ...]:
    return (
        Dimension("learning_rate", math.log10(lr_bounds[0]), math.log10(lr_bounds[1]),
                  log10=True, bits=10),
        Dimension("n_layers", *layer_bounds, integer=True, bits=4),
        Dimension("n_qubits", *qubit_bounds, integer=True, bits=4),
        Dimension("hidden_units", *hidden_bounds, integer=True, bits=4),
        Dimension("batch_size", *batch_bounds, integer=True, bits=8),
    )


@dataclass(frozen=True)
class SearchSpace:
    """A box over tunable model settings, with fixed sequence length/epochs."""

    dimensions: tuple
    sequence_length: int
    epochs: int

    @classmethod
    def default(cls, sequence_length: int, epochs: int, **bounds) -> "SearchSpace":
        return cls(default_dimensions(**bounds), sequence_length, epochs)

    @property
    def n_dims(self) -> int:
        return len(self.dimensions)

    def bounds(self) -> list[tuple[float, float]]:
        return [(d.low, d.high) for d in self.dimensions]

    @property
    def total_bits(self) -> int:
        return sum(d.bits for d in self.dimensions)

    def decode_vector(self, vector) -> HyperConfig:
        """Any point of R^d maps (after clamping) to a valid configuration."""
        vector = np.asarray(vector, dtype=float)
        if vector.shape != (self.n_dims,):
            raise ConfigurationError(f"expected a {self.n_dims}-dimensional point")
        values = {d.name: d.decode(v) for d, v in zip(self.dimensions, vector)}
        return HyperConfig(
            learning_rate=values["learning_rate"],
            n_layers=values["n_layers"],
            n_qubits=values["n_qubits"],
            hidden_units=values["hidden_units"],
            sequence_length=self.sequence_length,
            batch_size=values["batch_size"],
            epochs=self.epochs,
        ).validate()

    def encode_config(self, config: HyperConfig) -> np.ndarray:
        raw = {
            "learning_rate": math.log10(config.learning_rate),
            "n_layers": float(config.n_layers),
            "n_qubits": float(config.n_qubits),
            "hidden_units": float(config.hidden_units),
            "batch_size": float(config.batch_size),
        }
        return np.array([min(max(raw[d.name], d.low), d.high) for d in self.dimensions])

    def decode_bits(self, bits) -> np.ndarray:
        """Gray-coded fixed-point decoding onto the box (MSB first per dimension).

        Gray coding keeps single-bit genome changes local in the box, which
        matters for rotation-driven updates.
        """
        bits = np.asarray(bits).astype(int).reshape(-1)
        if bits.shape != (self.total_bits,):
            raise ConfigurationError(f"expected {self.total_bits} genome bits, got {bits.shape}")
        vector = np.empty(self.n_dims)
        offset = 0
        for j, dim in enumerate(self.dimensions):
            chunk = bits[offset : offset + dim.bits]
            offset += dim.bits
            vector[j] = dim.low + (dim.high - dim.low) * gray_fraction(chunk)
        return vector

    def from_unit(self, unit) -> np.ndarray:
        """Map [0,1]^d coordinates onto the box."""
        unit = np.clip(np.asarray(unit, dtype=float), 0.0, 1.0)
        lows = np.array([d.low for d in self.dimensions])
        highs = np.array([d.high for d in self.dimensions])
        return lows + unit * (highs - lows)

    def to_unit(self, vector) -> np.ndarray:
        lows = np.array([d.low for d in self.dimensions])
        highs = np.array([d.high for d in self.dimensions])
        span = np.where(highs > lows, highs - lows, 1.0)  # pinned dims map to 0
        return (np.asarray(vector, dtype=float) - lows) / span


def gray_fraction(bits) -> float:
    """Decode a Gray-coded bit chunk to a fraction in [0, 1]."""
    value = 0
    acc = 0
    for b in bits:
        acc ^= int(b)
        value = (value << 1) | acc
    return value / float(2 ** len(bits) - 1)
