"""Hourly weather data pipeline.

Ingests the hourly CSV schema (``date,time,temperature,dew_point_temp,
rel_humidity,wind_speed,visibility,pressure,precipitation``), imputes
missing cells with train-split medians, applies robust (median/IQR) scaling
followed by Z-score standardization -- both fitted on the training split
only -- and windows the standardized matrix into supervised next-hour
sequences.  A seeded synthetic generator provides desk-scale fixtures.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DataError

FEATURES = (
    "temperature",
    "dew_point",
    "rel_humidity",
    "wind_speed",
    "visibility",
    "pressure",
    "precipitation",
)
TEMPERATURE = 0  # column index of the forecast target

CSV_COLUMNS = (
    "date",
    "time",
    "temperature",
    "dew_point_temp",
    "rel_humidity",
    "wind_speed",
    "visibility",
    "pressure",
    "precipitation",
)

TRAIN_FRACTION = 0.87
CACHE_VERSION = 1


@dataclass
class WeatherRecord:
    """One hourly observation; ``None`` marks a missing cell."""

    date: dt.date
    hour: int
    temperature: float | None
    dew_point: float | None
    rel_humidity: float | None
    wind_speed: float | None
    visibility: float | None
    pressure: float | None
    precipitation: float | None

    def timestamp(self) -> dt.datetime:
        return dt.datetime(self.date.year, self.date.month, self.date.day, self.hour)

    def values(self) -> list:
        return [getattr(self, name) for name in FEATURES]


def _parse_hour(text: str, line_no: int) -> int:
    raw = text.strip()
    if ":" in raw:
        raw = raw.split(":", 1)[0]
    try:
        hour = int(raw)
    except ValueError as exc:
        raise DataError(f"line {line_no}: bad time value {text!r}") from exc
    if not 0 <= hour <= 23:
        raise DataError(f"line {line_no}: hour {hour} outside [0, 23]")
    return hour


def _parse_cell(text: str, column: str, line_no: int) -> float | None:
    raw = text.strip()
    if raw == "":
        return None
    try:
        value = float(raw)
    except ValueError as exc:
        raise DataError(f"line {line_no}: bad {column} value {text!r}") from exc
    if not math.isfinite(value):
        raise DataError(f"line {line_no}: non-finite {column} value {text!r}")
    return value


def ingest_csv(path) -> list[WeatherRecord]:
    """Parse the hourly CSV into chronological records.

    Empty cells become missing values.  Rows must be hourly-contiguous:
    a non-monotonic or gapped timestamp sequence raises
    :class:`~qforecast.errors.DataError` with the offending line number.
    """
    records: list[WeatherRecord] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if tuple(h.strip() for h in header) != CSV_COLUMNS:
            raise DataError(f"{path}: header {header!r} does not match expected schema")
        prev_ts = None
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(CSV_COLUMNS):
                raise DataError(f"line {line_no}: expected {len(CSV_COLUMNS)} cells, got {len(row)}")
            try:
                date = dt.date.fromisoformat(row[0].strip())
            except ValueError as exc:
                raise DataError(f"line {line_no}: bad date {row[0]!r}") from exc
            hour = _parse_hour(row[1], line_no)
            cells = [_parse_cell(row[2 + i], name, line_no) for i, name in enumerate(FEATURES)]
            record = WeatherRecord(date, hour, *cells)
            ts = record.timestamp()
            if prev_ts is not None:
                if ts <= prev_ts:
                    raise DataError(f"line {line_no}: timestamps not strictly increasing")
                if ts - prev_ts != dt.timedelta(hours=1):
                    raise DataError(f"line {line_no}: gap larger than one hour before {ts}")
            prev_ts = ts
            records.append(record)
    return records


def write_csv(records, path) -> None:
    """Write records back out in the ingestion schema (missing -> empty cell)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            cells = ["" if v is None else format(v, ".6f") for v in rec.values()]
            writer.writerow([rec.date.isoformat(), f"{rec.hour:02d}"] + cells)


def records_matrix(records) -> np.ndarray:
    """Records as a float matrix with NaN for missing cells."""
    out = np.full((len(records), len(FEATURES)), np.nan)
    for i, rec in enumerate(records):
        for j, value in enumerate(rec.values()):
            if value is not None:
                out[i, j] = value
    return out


def split_point(n_rows: int, train_fraction: float = TRAIN_FRACTION) -> int:
    """Number of training rows: floor(train_fraction * n_rows)."""
    return int(math.floor(train_fraction * n_rows))


def fit_medians(train_matrix: np.ndarray) -> np.ndarray:
    """Per-feature medians of the present training cells."""
    medians = np.empty(train_matrix.shape[1])
    for j in range(train_matrix.shape[1]):
        col = train_matrix[:, j]
        present = col[~np.isnan(col)]
        if present.size == 0:
            raise ConfigurationError(f"feature {FEATURES[j]!r} has no present values to impute from")
        medians[j] = np.median(present)
    return medians


def impute_median(matrix: np.ndarray, medians: np.ndarray) -> np.ndarray:
    """Replace every missing cell with its feature's (train-split) median."""
    out = matrix.copy()
    mask = np.isnan(out)
    out[mask] = np.broadcast_to(medians, out.shape)[mask]
    return out


@dataclass
class ScalerState:
    """Robust (median/IQR) then Z-score statistics, fitted on training rows only.

    ``robust_skip`` marks features whose IQR collapsed to zero (passed
    through stage one unscaled); ``z_skip`` marks features constant after
    stage one (passed through stage two as well).
    """

    median: np.ndarray
    q1: np.ndarray
    q3: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    robust_skip: np.ndarray  # bool mask
    z_skip: np.ndarray  # bool mask
    n_fit_rows: int

    @property
    def iqr(self) -> np.ndarray:
        return self.q3 - self.q1


def fit_scaler(train_matrix: np.ndarray) -> ScalerState:
    if np.isnan(train_matrix).any():
        raise ConfigurationError("impute before fitting the scaler")
    q1 = np.percentile(train_matrix, 25, axis=0)
    median = np.percentile(train_matrix, 50, axis=0)
    q3 = np.percentile(train_matrix, 75, axis=0)
    iqr = q3 - q1
    robust_skip = iqr == 0.0
    if robust_skip.any():
        names = [FEATURES[j] for j in np.where(robust_skip)[0]]
        warnings.warn(f"zero IQR for {names}; passing through unscaled", stacklevel=2)
    stage1 = np.where(robust_skip, train_matrix, (train_matrix - median) / np.where(iqr == 0, 1, iqr))
    mean = stage1.mean(axis=0)
    std = stage1.std(axis=0)
    z_skip = std == 0.0
    return ScalerState(
        median=median, q1=q1, q3=q3, mean=mean, std=std,
        robust_skip=robust_skip, z_skip=z_skip, n_fit_rows=len(train_matrix),
    )


def robust_scale(matrix: np.ndarray, scaler: ScalerState) -> np.ndarray:
    """Stage one: (x - median) / IQR, zero-IQR features passed through."""
    iqr = np.where(scaler.robust_skip, 1.0, scaler.iqr)
    return np.where(scaler.robust_skip, matrix, (matrix - scaler.median) / iqr)


def zscore(stage1: np.ndarray, scaler: ScalerState) -> np.ndarray:
    """Stage two: (x - mean) / std on the stage-one output."""
    std = np.where(scaler.z_skip, 1.0, scaler.std)
    return np.where(scaler.z_skip, stage1, (stage1 - scaler.mean) / std)


def transform(matrix: np.ndarray, scaler: ScalerState) -> np.ndarray:
    return zscore(robust_scale(matrix, scaler), scaler)


def inverse_transform(standardized: np.ndarray, scaler: ScalerState) -> np.ndarray:
    stage1 = np.where(scaler.z_skip, standardized, standardized * scaler.std + scaler.mean)
    return np.where(scaler.robust_skip, stage1, stage1 * scaler.iqr + scaler.median)


def destandardize_temperature(values: np.ndarray, scaler: ScalerState) -> np.ndarray:
    """Inverse transform for the temperature column alone."""
    j = TEMPERATURE
    stage1 = values if scaler.z_skip[j] else values * scaler.std[j] + scaler.mean[j]
    return stage1 if scaler.robust_skip[j] else stage1 * scaler.iqr[j] + scaler.median[j]


@dataclass
class WindowedDataset:
    """Supervised windows: each target is the hour right after its window."""

    inputs: np.ndarray  # (n, sequence_length, n_features)
    targets: np.ndarray  # (n,) standardized next-hour temperature
    target_rows: np.ndarray  # (n,) row index of each target in the source matrix
    split: str  # provenance tag: "train" / "val" / "test"

    def __len__(self) -> int:
        return len(self.targets)


def make_windows(matrix: np.ndarray, sequence_length: int, split: str = "train") -> WindowedDataset:
    """Slide a length-m window over consecutive rows.

    Window i covers rows [i, i+m) and targets the temperature at row i+m,
    giving ``rows - m`` windows.
    """
    if sequence_length < 1:
        raise ConfigurationError(f"sequence_length must be >= 1, got {sequence_length}")
    rows = len(matrix)
    n = rows - sequence_length
    if n < 1:
        raise ConfigurationError(
            f"need more than {sequence_length} rows to window, got {rows}"
        )
    idx = np.arange(n)[:, None] + np.arange(sequence_length)[None, :]
    inputs = matrix[idx]
    target_rows = np.arange(sequence_length, rows)
    targets = matrix[target_rows, TEMPERATURE]
    return WindowedDataset(inputs=inputs, targets=targets, target_rows=target_rows, split=split)


@dataclass
class Dataset:
    """Standardized train/test matrices plus the scaler that produced them."""

    train_matrix: np.ndarray
    test_matrix: np.ndarray
    scaler: ScalerState
    n_rows: int

    def train_val_windows(self, sequence_length: int, val_fraction: float = 0.1):
        """Windows over the training matrix, partitioned by target row.

        The last ``val_fraction`` of training rows form the validation
        segment: windows whose target falls there become validation windows
        (their inputs may reach back into earlier rows, which only uses the
        past).
        """
        rows = len(self.train_matrix)
        val_rows = int(math.floor(val_fraction * rows))
        val_start = rows - val_rows
        if val_start <= sequence_length:
            raise ConfigurationError("training split too small for this window length")
        windows = make_windows(self.train_matrix, sequence_length, split="train")
        is_val = windows.target_rows >= val_start
        train_part = WindowedDataset(
            windows.inputs[~is_val], windows.targets[~is_val],
            windows.target_rows[~is_val], "train",
        )
        val_part = WindowedDataset(
            windows.inputs[is_val], windows.targets[is_val],
            windows.target_rows[is_val], "val",
        )
        return train_part, val_part

    def test_windows(self, sequence_length: int) -> WindowedDataset:
        return make_windows(self.test_matrix, sequence_length, split="test")


def prepare_dataset(records, train_fraction: float = TRAIN_FRACTION) -> Dataset:
    """Chronological split, train-fitted imputation and two-stage scaling."""
    if not records:
        raise ConfigurationError("no records to prepare")
    matrix = records_matrix(records)
    n_train = split_point(len(records), train_fraction)
    if n_train < 2 or n_train >= len(records):
        raise ConfigurationError(f"split produces degenerate train/test sizes ({n_train})")
    medians = fit_medians(matrix[:n_train])
    full = impute_median(matrix, medians)
    scaler = fit_scaler(full[:n_train])
    standardized = transform(full, scaler)
    return Dataset(
        train_matrix=standardized[:n_train],
        test_matrix=standardized[n_train:],
        scaler=scaler,
        n_rows=len(records),
    )


def save_dataset(path, dataset: Dataset) -> None:
    """Versioned binary cache with the scaler embedded."""
    np.savez(
        path,
        version=np.array(CACHE_VERSION),
        train_matrix=dataset.train_matrix,
        test_matrix=dataset.test_matrix,
        n_rows=np.array(dataset.n_rows),
        median=dataset.scaler.median,
        q1=dataset.scaler.q1,
        q3=dataset.scaler.q3,
        mean=dataset.scaler.mean,
        std=dataset.scaler.std,
        robust_skip=dataset.scaler.robust_skip,
        z_skip=dataset.scaler.z_skip,
        n_fit_rows=np.array(dataset.scaler.n_fit_rows),
    )


def load_dataset(path) -> Dataset:
    from .errors import CheckpointVersionError

    with np.load(path, allow_pickle=False) as data:
        version = int(data["version"])
        if version != CACHE_VERSION:
            raise CheckpointVersionError(
                f"dataset cache version {version} unsupported (expected {CACHE_VERSION})"
            )
        scaler = ScalerState(
            median=data["median"], q1=data["q1"], q3=data["q3"],
            mean=data["mean"], std=data["std"],
            robust_skip=data["robust_skip"], z_skip=data["z_skip"],
            n_fit_rows=int(data["n_fit_rows"]),
        )
        return Dataset(
            train_matrix=data["train_matrix"],
            test_matrix=data["test_matrix"],
            scaler=scaler,
            n_rows=int(data["n_rows"]),
        )


# ---------------------------------------------------------------------------
# Synthetic fixture generator
# ---------------------------------------------------------------------------

HOURS_PER_YEAR = 8766.0
SYNTH_START = dt.datetime(2015, 1, 1, 0)


def synth_series(
    n_hours: int,
    seed: int,
    *,
    noise_sigma: float = 0.1,
    daily_amplitude: float = 8.0,
    annual_amplitude: float = 6.0,
    base_temperature: float = 8.0,
    missing_fraction: float = 0.0,
) -> list[WeatherRecord]:
    """Seeded synthetic hourly weather: a daily sinusoid on top of a slow
    annual sinusoid plus Gaussian noise, with the remaining features derived
    as noisy correlates of temperature.  Bit-identical for a fixed seed.
    """
    if n_hours < 48:
        raise ConfigurationError(f"n_hours must be >= 48, got {n_hours}")
    rng = np.random.default_rng(seed)
    t = np.arange(n_hours, dtype=float)
    daily = np.sin(2 * np.pi * t / 24.0)
    annual = np.sin(2 * np.pi * t / HOURS_PER_YEAR)
    temp = (
        base_temperature
        + daily_amplitude * daily
        + annual_amplitude * annual
        + noise_sigma * rng.normal(size=n_hours)
    )
    dew = temp - 4.0 + 0.6 * np.sin(2 * np.pi * t / 24.0 + 1.0) + 0.5 * noise_sigma * rng.normal(size=n_hours)
    humidity = np.clip(72.0 - 1.4 * (temp - base_temperature) + 2.0 * noise_sigma * rng.normal(size=n_hours), 5.0, 100.0)
    wind = np.clip(12.0 + 4.0 * np.sin(2 * np.pi * t / 24.0 + 2.0) + 3.0 * noise_sigma * rng.normal(size=n_hours), 0.0, None)
    visibility = np.clip(24.0 + 6.0 * annual - 0.05 * humidity + 2.0 * noise_sigma * rng.normal(size=n_hours), 0.1, None)
    pressure = 101.0 + 0.6 * np.sin(2 * np.pi * t / 307.0) + 0.2 * noise_sigma * rng.normal(size=n_hours)
    rain_mask = rng.random(n_hours) < 0.08
    precipitation = np.where(rain_mask, rng.gamma(2.0, 0.8, size=n_hours), 0.0)

    missing = None
    if missing_fraction > 0.0:
        missing = rng.random((n_hours, len(FEATURES))) < missing_fraction

    records = []
    for i in range(n_hours):
        ts = SYNTH_START + dt.timedelta(hours=i)
        cells = [temp[i], dew[i], humidity[i], wind[i], visibility[i], pressure[i], precipitation[i]]
        if missing is not None:
            cells = [None if missing[i, j] else cells[j] for j in range(len(cells))]
        records.append(WeatherRecord(ts.date(), ts.hour, *cells))
    return records
