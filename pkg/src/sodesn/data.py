"""Sensor time-series handling: CSV ingestion, normalization, synthesis,
fault injection and train/test splitting.

A :class:`SeriesSet` keeps one column per sensor in engineering units.
Normalization maps each column into [-1, 1] by min-max so the values match
the tanh operating range of the reservoir; the (offset, scale) pair is kept
for exact denormalization.  Normalization parameters are always fitted on
training data and then applied to test data, never refitted, to avoid
leakage.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .errors import DataError
from .validation import check_nonneg_int, check_positive_int, ensure_rng

__all__ = [
    "SeriesSet",
    "Normalization",
    "Fault",
    "FaultSchedule",
    "load_csv",
    "save_csv",
    "fit_normalization",
    "normalize",
    "synthesize_correlated",
    "diurnal_base",
    "apply_faults",
    "split_incremental_cv",
    "default_washout",
]

DEFAULT_START = datetime(2000, 1, 1, 0, 0)


@dataclass(frozen=True)
class Normalization:
    """Per-sensor affine map to [-1, 1]: ``normalized = (x - offset) / scale``."""

    offset: np.ndarray
    scale: np.ndarray

    def transform(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=float) - self.offset) / self.scale

    def inverse(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=float) * self.scale + self.offset

    def inverse_column(self, values: np.ndarray, column: int) -> np.ndarray:
        return np.asarray(values, dtype=float) * self.scale[column] + self.offset[column]


@dataclass(frozen=True)
class SeriesSet:
    """Aligned multivariate time series, one column per sensor.

    ``samples`` has shape (T, K).  ``normalization`` is set once the values
    have been mapped to [-1, 1]; it is None for raw engineering-unit data.
    """

    names: tuple
    samples: np.ndarray
    interval_minutes: float = 15.0
    start: datetime = DEFAULT_START
    normalization: Normalization | None = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 2:
            raise ValueError(f"samples must be 2-D, got shape {samples.shape}")
        if samples.shape[1] != len(self.names):
            raise ValueError(
                f"{len(self.names)} sensor names but {samples.shape[1]} columns"
            )
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def n_steps(self) -> int:
        return self.samples.shape[0]

    @property
    def n_sensors(self) -> int:
        return self.samples.shape[1]

    def column(self, name: str) -> np.ndarray:
        return self.samples[:, self.names.index(name)]

    def window(self, start: int, stop: int) -> "SeriesSet":
        return replace(
            self,
            samples=self.samples[start:stop],
            start=self.start + timedelta(minutes=start * self.interval_minutes),
        )


@dataclass(frozen=True)
class Fault:
    """One scheduled sensor fault; the only modeled kind is stuck-at-zero."""

    sensor: int
    start: int
    kind: str = "stuck_at_zero"


@dataclass(frozen=True)
class FaultSchedule:
    faults: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "faults", tuple(self.faults))

    def sensors(self) -> list:
        return sorted({f.sensor for f in self.faults})

    def __iter__(self):
        return iter(self.faults)

    def __len__(self):
        return len(self.faults)


def load_csv(path, expected_columns=None, forward_fill: bool = False) -> SeriesSet:
    """Read a sensor CSV: header ``timestamp,<sensor>...``, ISO-8601 stamps.

    Validates monotone timestamps and a uniform sampling interval.  Empty
    cells are an error unless ``forward_fill`` is set, in which case the
    previous row's value is copied.
    """
    import csv as _csv

    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = _csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if not header or header[0].strip() != "timestamp":
            raise DataError(f"{path}: first header column must be 'timestamp'")
        names = [h.strip() for h in header[1:]]
        if not names:
            raise DataError(f"{path}: no sensor columns")
        timestamps = []
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            if not raw:
                continue
            if len(raw) != len(names) + 1:
                raise DataError(
                    f"{path}:{lineno}: expected {len(names) + 1} cells, got {len(raw)}"
                )
            try:
                stamp = datetime.fromisoformat(raw[0].strip())
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad timestamp {raw[0]!r}") from exc
            timestamps.append(stamp)
            row = np.empty(len(names))
            for k, cell in enumerate(raw[1:]):
                cell = cell.strip()
                if cell == "":
                    if not forward_fill:
                        raise DataError(
                            f"{path}:{lineno}: missing value in column {names[k]!r}"
                        )
                    if not rows:
                        raise DataError(
                            f"{path}:{lineno}: cannot forward-fill first row"
                            f" in column {names[k]!r}"
                        )
                    row[k] = rows[-1][k]
                else:
                    try:
                        row[k] = float(cell)
                    except ValueError as exc:
                        raise DataError(
                            f"{path}:{lineno}: non-numeric value {cell!r}"
                            f" in column {names[k]!r}"
                        ) from exc
            rows.append(row)
    if len(rows) < 2:
        raise DataError(f"{path}: need at least 2 data rows")
    deltas = [
        (timestamps[i + 1] - timestamps[i]).total_seconds()
        for i in range(len(timestamps) - 1)
    ]
    if any(d <= 0 for d in deltas):
        raise DataError(f"{path}: timestamps are not strictly increasing")
    if any(d != deltas[0] for d in deltas):
        raise DataError(f"{path}: non-uniform sampling interval")
    series = SeriesSet(
        names=tuple(names),
        samples=np.vstack(rows),
        interval_minutes=deltas[0] / 60.0,
        start=timestamps[0],
    )
    if expected_columns is not None:
        missing = [c for c in expected_columns if c not in series.names]
        if missing:
            raise DataError(f"{path}: missing expected columns {missing}")
        idx = [series.names.index(c) for c in expected_columns]
        series = replace(
            series, names=tuple(expected_columns), samples=series.samples[:, idx]
        )
    return series


def save_csv(series: SeriesSet, path) -> None:
    """Write a SeriesSet in the ingestion format; float values round-trip
    bit-exactly (shortest repr)."""
    step = timedelta(minutes=series.interval_minutes)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("timestamp," + ",".join(series.names) + "\n")
        for i in range(series.n_steps):
            stamp = (series.start + i * step).isoformat()
            cells = ",".join(repr(float(v)) for v in series.samples[i])
            fh.write(f"{stamp},{cells}\n")


def fit_normalization(series: SeriesSet) -> Normalization:
    """Min-max parameters computed over ``series`` (use the training portion)."""
    mn = series.samples.min(axis=0)
    mx = series.samples.max(axis=0)
    flat = np.flatnonzero(mx == mn)
    if flat.size:
        names = [series.names[i] for i in flat]
        raise DataError(f"constant column(s) {names}: zero range, cannot normalize")
    return Normalization(offset=(mn + mx) / 2.0, scale=(mx - mn) / 2.0)


def normalize(series: SeriesSet, normalization: Normalization | None = None) -> SeriesSet:
    """Map each column into [-1, 1].

    Without an explicit ``normalization`` the parameters are fitted on
    ``series`` itself; pass the training-set parameters when transforming
    test data.
    """
    if series.normalization is not None:
        raise ValueError("series is already normalized")
    norm = normalization if normalization is not None else fit_normalization(series)
    return replace(series, samples=norm.transform(series.samples), normalization=norm)


def denormalize(series: SeriesSet) -> SeriesSet:
    if series.normalization is None:
        raise ValueError("series carries no normalization parameters")
    return replace(
        series,
        samples=series.normalization.inverse(series.samples),
        normalization=None,
    )


def diurnal_base(
    n_steps: int,
    interval_minutes: float = 15.0,
    rng=None,
    mean: float = 18.0,
    daily_amplitude: float = 8.0,
    half_daily_amplitude: float = 2.0,
    weather_amplitude: float = 1.0,
) -> np.ndarray:
    """Synthetic air-temperature-like series: daily and half-daily cycles plus
    a smooth random weather drift.

    Stands in for real weather-station data wherever a CSV is not supplied.
    """
    n_steps = check_positive_int("n_steps", n_steps)
    rng = ensure_rng(rng)
    steps_per_day = 24 * 60 / interval_minutes
    t = np.arange(n_steps)
    phase1, phase2 = rng.uniform(0, 2 * np.pi, size=2)
    base = mean
    base = base + daily_amplitude * np.sin(2 * np.pi * t / steps_per_day + phase1)
    base = base + half_daily_amplitude * np.sin(4 * np.pi * t / steps_per_day + phase2)
    # Weather drift: white noise smoothed over ~1 day, rescaled to unit std.
    drift = gaussian_filter1d(rng.standard_normal(n_steps), sigma=steps_per_day)
    std = drift.std()
    if std > 0:
        drift = drift / std
    return base + weather_amplitude * drift


def synthesize_correlated(
    base,
    count: int,
    max_shift_steps: int = 2,
    noise_fraction: float = 0.10,
    rng=None,
    interval_minutes: float = 15.0,
) -> SeriesSet:
    """Derive ``count`` correlated copies of a single base series.

    Each copy gets an independent integer time shift in
    ``[-max_shift_steps, +max_shift_steps]`` and additive uniform noise with
    half-width ``noise_fraction`` times the base range.  The output is
    trimmed by ``max_shift_steps`` at both ends so all copies stay aligned.
    """
    base = np.asarray(base, dtype=float).ravel()
    count = check_positive_int("count", count)
    max_shift_steps = check_nonneg_int("max_shift_steps", max_shift_steps)
    if base.shape[0] <= 2 * max_shift_steps:
        raise ValueError(
            f"base length {base.shape[0]} too short for shifts of +-{max_shift_steps}"
        )
    rng = ensure_rng(rng)
    n_out = base.shape[0] - 2 * max_shift_steps
    amplitude = noise_fraction * (base.max() - base.min())
    samples = np.empty((n_out, count))
    for k in range(count):
        shift = int(rng.integers(-max_shift_steps, max_shift_steps + 1))
        offset = max_shift_steps + shift
        copy = base[offset : offset + n_out].copy()
        if amplitude > 0:
            copy += rng.uniform(-amplitude, amplitude, size=n_out)
        samples[:, k] = copy
    names = tuple(f"s{k:02d}" for k in range(count))
    return SeriesSet(names=names, samples=samples, interval_minutes=interval_minutes)


def apply_faults(series: SeriesSet, schedule: FaultSchedule) -> SeriesSet:
    """Zero out scheduled sensors from their start step onward.

    The input series is left untouched and doubles as the ground truth for
    scoring.
    """
    samples = series.samples.copy()
    for fault in schedule:
        if fault.kind != "stuck_at_zero":
            raise ValueError(f"unknown fault kind {fault.kind!r}")
        if not 0 <= fault.sensor < series.n_sensors:
            raise ValueError(f"fault sensor {fault.sensor} out of range")
        if not 0 <= fault.start < series.n_steps:
            raise ValueError(f"fault start step {fault.start} outside series")
        samples[fault.start :, fault.sensor] = 0.0
    return replace(series, samples=samples)


@dataclass(frozen=True)
class CvSplit:
    train_size: int
    fold: int
    train: SeriesSet
    test: SeriesSet


def split_incremental_cv(
    series: SeriesSet, train_sizes, test_size: int, folds: int
) -> list:
    """Contiguous train/test windows for incremental cross validation.

    Within a fold the test window is fixed and the training window grows
    backwards from it, so every train size is scored against the same test
    data.  Fold offsets are spread evenly over the available slack.
    """
    train_sizes = [check_positive_int("train size", s) for s in train_sizes]
    test_size = check_positive_int("test_size", test_size)
    folds = check_positive_int("folds", folds)
    max_train = max(train_sizes)
    span = max_train + test_size
    slack = series.n_steps - span
    if slack < 0:
        raise ValueError(
            f"series of length {series.n_steps} cannot hold train {max_train}"
            f" + test {test_size}"
        )
    offsets = [round(f * slack / (folds - 1)) if folds > 1 else 0 for f in range(folds)]
    splits = []
    for size in train_sizes:
        for fold, off in enumerate(offsets):
            train_start = off + max_train - size
            test_start = off + max_train
            splits.append(
                CvSplit(
                    train_size=size,
                    fold=fold,
                    train=series.window(train_start, test_start),
                    test=series.window(test_start, test_start + test_size),
                )
            )
    return splits


def default_washout(n_train: int) -> int:
    """Initial samples discarded before regression: min(1000, 10% of length)."""
    return min(1000, n_train // 10)
