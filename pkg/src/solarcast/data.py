"""Loading, synthesizing and splitting timestamped solar datasets."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import (
    DatasetTooSmall,
    InvalidConfig,
    InvalidFoldCount,
    MalformedCsv,
    MissingTarget,
    NegativeTarget,
    SchemaMismatch,
)

TIMESTAMP_COLUMN = "timestamp"
TARGET_COLUMN = "power"
ISO_FORMAT = "%Y-%m-%dT%H:%M:%SZ"

# 2021-06-01T00:00:00Z
SYNTH_START_EPOCH = 1622505600


@dataclass(frozen=True)
class FeatureSchema:
    names: tuple[str, ...]
    units: tuple[str, ...]

    def __post_init__(self):
        if len(self.names) == 0:
            raise InvalidConfig("schema needs at least one feature")
        if any(not n for n in self.names):
            raise InvalidConfig("feature names must be non-empty")
        if len(set(self.names)) != len(self.names):
            raise InvalidConfig("feature names must be unique")
        if len(self.units) != len(self.names):
            raise InvalidConfig("one unit string per feature")

    @property
    def header(self) -> list[str]:
        return [TIMESTAMP_COLUMN, *self.names, TARGET_COLUMN]

    def to_dict(self) -> dict:
        return {"names": list(self.names), "units": list(self.units)}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        return cls(tuple(d["names"]), tuple(d["units"]))


DEFAULT_SCHEMA = FeatureSchema(
    names=("temperature", "humidity", "wind_speed", "irradiance"),
    units=("°C", "%", "m/s", "W/m²"),
)


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Timestamped feature matrix plus power target.

    Missing feature cells are NaN. The target may be NaN only for datasets
    loaded for prediction (``require_target=False``).
    """

    timestamps: np.ndarray  # int64 UTC epoch seconds
    features: np.ndarray  # (n, d) float64
    target: np.ndarray  # (n,) float64, kW
    schema: FeatureSchema = DEFAULT_SCHEMA

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64)
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.target, dtype=np.float64)
        if X.ndim != 2:
            X = X.reshape(len(ts), len(self.schema.names))
        n = len(ts)
        if X.shape != (n, len(self.schema.names)) or y.shape != (n,):
            raise SchemaMismatch(
                f"column lengths disagree: {n} timestamps, features {X.shape}, target {y.shape}"
            )
        if n > 1 and np.any(np.diff(ts) < 0):
            raise MalformedCsv("timestamps must be non-decreasing")
        if np.any(y < 0):
            raise NegativeTarget("negative power value")
        for a in (ts, X, y):
            a.setflags(write=False)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "target", y)

    def __len__(self) -> int:
        return len(self.timestamps)

    @property
    def n(self) -> int:
        return len(self.timestamps)

    @property
    def missing_count(self) -> int:
        return int(np.isnan(self.features).sum())

    def subset(self, rows) -> "LabeledDataset":
        rows = np.asarray(rows, dtype=np.int64)
        return LabeledDataset(
            self.timestamps[rows], self.features[rows], self.target[rows], self.schema
        )

    def equals(self, other: "LabeledDataset") -> bool:
        """Exact equality, treating NaN cells as equal to each other."""
        return (
            self.schema == other.schema
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.features, other.features, equal_nan=True)
            and np.array_equal(self.target, other.target, equal_nan=True)
        )


def parse_timestamp(text: str) -> int:
    s = text.strip()
    if s.endswith("Z"):
        s = s[:-1] + "+00:00"
    dt = datetime.fromisoformat(s)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def format_timestamp(epoch: int) -> str:
    return datetime.fromtimestamp(int(epoch), tz=timezone.utc).strftime(ISO_FORMAT)


def _parse_cell(cell: str, line_no: int, column: str) -> float:
    if cell == "":
        return math.nan
    try:
        value = float(cell)
    except ValueError:
        raise MalformedCsv(f"line {line_no}: cannot parse {column}={cell!r}") from None
    if not math.isfinite(value):
        raise MalformedCsv(f"line {line_no}: non-finite {column}={cell!r}")
    return value


def load_csv(path, schema: FeatureSchema = DEFAULT_SCHEMA, require_target: bool = True) -> LabeledDataset:
    """Read a dataset from CSV.

    Empty cells become NaN. Rows with an empty target are rejected unless
    ``require_target`` is false (batch prediction input).
    """
    path = Path(path)
    timestamps, rows, target = [], [], []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedCsv(f"{path}: missing header row") from None
        if header != schema.header:
            raise SchemaMismatch(f"{path}: header {header} != expected {schema.header}")
        width = len(header)
        for line_no, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if len(cells) != width:
                raise MalformedCsv(f"line {line_no}: expected {width} columns, got {len(cells)}")
            try:
                timestamps.append(parse_timestamp(cells[0]))
            except ValueError:
                raise MalformedCsv(f"line {line_no}: bad timestamp {cells[0]!r}") from None
            rows.append([_parse_cell(c, line_no, name) for c, name in zip(cells[1:-1], schema.names)])
            power = _parse_cell(cells[-1], line_no, TARGET_COLUMN)
            if math.isnan(power) and require_target:
                raise MissingTarget(f"line {line_no}: missing power value")
            if power < 0:
                raise NegativeTarget(f"line {line_no}: negative power {cells[-1]}")
            target.append(power)
    d = len(schema.names)
    return LabeledDataset(
        np.array(timestamps, dtype=np.int64),
        np.array(rows, dtype=np.float64).reshape(len(rows), d),
        np.array(target, dtype=np.float64),
        schema,
    )


def _format_value(v: float) -> str:
    return "" if math.isnan(v) else repr(float(v))


def write_csv(ds: LabeledDataset, path) -> None:
    """Write a dataset so that :func:`load_csv` reproduces it exactly."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ds.schema.header)
        for ts, xs, y in zip(ds.timestamps, ds.features, ds.target):
            writer.writerow([format_timestamp(ts), *(_format_value(v) for v in xs), _format_value(y)])


@dataclass(frozen=True)
class SynthConfig:
    n_days: int = 250
    step_minutes: int = 36
    peak_irradiance: float = 1000.0
    panel_efficiency: float = 0.9
    noise_std: float = 5.0
    seed: int = 42
    missing_rate: float = 0.0

    def validate(self) -> None:
        if self.n_days < 1:
            raise InvalidConfig("n_days must be >= 1")
        if self.step_minutes < 1 or 1440 % self.step_minutes != 0:
            raise InvalidConfig("step_minutes must divide 1440")
        if not 0 < self.panel_efficiency <= 1:
            raise InvalidConfig("panel_efficiency must lie in (0, 1]")
        if self.peak_irradiance < 0:
            raise InvalidConfig("peak_irradiance must be >= 0")
        if self.noise_std < 0:
            raise InvalidConfig("noise_std must be >= 0")
        if not 0 <= self.missing_rate < 1:
            raise InvalidConfig("missing_rate must lie in [0, 1)")


def clear_sky_irradiance(hour_of_day, peak_irradiance: float):
    """Half-sine irradiance between 06:00 and 18:00, zero otherwise."""
    h = np.asarray(hour_of_day, dtype=np.float64)
    irr = peak_irradiance * np.sin(np.pi * (h - 6.0) / 12.0)
    # strict bounds: sin(pi) rounds to ~1e-16, which must not count as daylight
    return np.where((h > 6.0) & (h < 18.0), np.maximum(irr, 0.0), 0.0)


def power_model(irradiance, temperature, panel_efficiency: float):
    """Noise-free plant output in kW.

    Output scales as a 1000 m² array, so kW equals efficiency times W/m²
    numerically, derated 0.4 %/°C above 25 °C.
    """
    irr = np.asarray(irradiance, dtype=np.float64)
    temp = np.asarray(temperature, dtype=np.float64)
    return panel_efficiency * irr * (1.0 - 0.004 * np.maximum(0.0, temp - 25.0))


def generate_synthetic(cfg: SynthConfig) -> LabeledDataset:
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    per_day = 1440 // cfg.step_minutes
    n = cfg.n_days * per_day
    step_s = cfg.step_minutes * 60
    timestamps = SYNTH_START_EPOCH + step_s * np.arange(n, dtype=np.int64)
    hour = ((timestamps - SYNTH_START_EPOCH) % 86400) / 3600.0
    day = np.arange(n) // per_day

    daily_base = rng.normal(22.0, 4.0, size=cfg.n_days)[day]
    temperature = daily_base + 7.0 * np.sin(np.pi * (hour - 9.0) / 12.0) + rng.normal(0.0, 1.0, size=n)
    humidity = np.clip(70.0 - 1.5 * (temperature - 22.0) + rng.normal(0.0, 5.0, size=n), 5.0, 100.0)
    daily_wind = rng.gamma(4.0, 0.8, size=cfg.n_days)[day]
    wind = np.abs(daily_wind + 1.0 * np.sin(np.pi * (hour - 10.0) / 12.0) + rng.normal(0.0, 0.7, size=n))
    irradiance = clear_sky_irradiance(hour, cfg.peak_irradiance)

    power = power_model(irradiance, temperature, cfg.panel_efficiency)
    noise = rng.normal(0.0, 1.0, size=n) * cfg.noise_std
    # no generation at night, so noise only applies while the sun is up
    power = np.maximum(power + np.where(irradiance > 0, noise, 0.0), 0.0)

    X = np.column_stack([temperature, humidity, wind, irradiance])
    if cfg.missing_rate > 0:
        mask = rng.random(X.shape) < cfg.missing_rate
        X = np.where(mask, np.nan, X)
    return LabeledDataset(timestamps, X, power, DEFAULT_SCHEMA)


@dataclass(frozen=True)
class SplitIndices:
    train: np.ndarray
    test: np.ndarray
    seed: int = field(default=0)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split(ds_or_n, test_fraction: float, seed: int) -> SplitIndices:
    """Seeded shuffle split; accepts a dataset or a row count."""
    n = ds_or_n if isinstance(ds_or_n, (int, np.integer)) else len(ds_or_n)
    if not 0 < test_fraction < 1:
        raise InvalidConfig("test_fraction must lie in (0, 1)")
    if n < 2:
        raise DatasetTooSmall(f"need at least 2 rows to split, got {n}")
    n_test = _round_half_up(test_fraction * n)
    if n_test == 0 or n_test == n:
        raise DatasetTooSmall(f"test_fraction={test_fraction} leaves an empty side for n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    return SplitIndices(np.sort(perm[n_test:]), np.sort(perm[:n_test]), seed)


def kfold_partition(n: int, k: int, seed: int) -> list[np.ndarray]:
    """Seeded k-fold partition of ``range(n)``; the first ``n % k`` folds get one extra row."""
    if not 2 <= k <= n:
        raise InvalidFoldCount(f"need 2 <= k <= n, got k={k}, n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    base, extra = divmod(n, k)
    folds, start = [], 0
    for f in range(k):
        size = base + (1 if f < extra else 0)
        folds.append(np.sort(perm[start:start + size]))
        start += size
    return folds
