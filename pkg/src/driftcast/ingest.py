"""Parse, regularize, segment and split consumption streams.

A LoadSeries is a regular timeline: start time plus a fixed resolution,
with one value per slot. The parser may leave NaN in slots where the CSV
had no reading; resample_and_fill() removes them, and everything
downstream demands a gapless series.

Day boundaries are midnight in whatever UTC offset the input timestamps
carry (naive timestamps are taken at face value). Days that do not come
out at exactly readings-per-day slots are dropped and counted, which keeps
every DaySample fixed-length -- the density grid requires that.
"""
from __future__ import annotations

import csv
import math
from collections.abc import Sequence
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from typing import Iterator

import numpy as np

from .errors import (
    EmptySeries,
    GapTooLarge,
    InvalidEvent,
    NegativeReading,
    NoCompleteDay,
    NonMonotoneTimestamps,
    TooFewDays,
    UnparseableRow,
)

DEFAULT_RESOLUTION = timedelta(minutes=10)

CSV_TIMESTAMP_COLUMN = "timestamp"
CSV_VALUE_COLUMN = "consumption_kwh"


@dataclass(frozen=True)
class LoadSeries:
    """Univariate consumption stream at a fixed resolution (kWh per slot)."""

    start_time: datetime
    resolution: timedelta
    values: np.ndarray  # float64; NaN marks a missing slot awaiting fill

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.size == 0:
            raise EmptySeries("a LoadSeries needs at least one value")
        if self.resolution <= timedelta(0):
            raise ValueError(f"resolution must be positive, got {self.resolution}")
        present = self.values[~np.isnan(self.values)]
        if not np.all(np.isfinite(present)):
            raise ValueError("readings must be finite")
        if np.any(present < 0):
            raise NegativeReading("consumption readings must be >= 0")

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def is_gapless(self) -> bool:
        return not bool(np.isnan(self.values).any())

    @property
    def n_missing(self) -> int:
        return int(np.isnan(self.values).sum())

    def timestamp_at(self, index: int) -> datetime:
        return self.start_time + index * self.resolution

    def timestamps(self) -> Iterator[datetime]:
        for i in range(len(self)):
            yield self.timestamp_at(i)


@dataclass(frozen=True)
class DaySample:
    """One complete day of readings, the unit of drift analysis."""

    day: date
    readings: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "readings", np.asarray(self.readings, dtype=float))
        if not np.all(np.isfinite(self.readings)):
            raise ValueError(f"day {self.day} has non-finite readings")


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.75
    validation_fraction_of_train: float = 1.0 / 6.0

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must lie in (0, 1)")
        if not 0 < self.validation_fraction_of_train < 1:
            raise ValueError("validation_fraction_of_train must lie in (0, 1)")


def readings_per_day(resolution: timedelta) -> int:
    seconds = resolution.total_seconds()
    slots = 86400.0 / seconds
    if abs(slots - round(slots)) > 1e-9:
        raise ValueError(f"resolution {resolution} does not divide a day evenly")
    return int(round(slots))


# --- CSV parsing ------------------------------------------------------------

def _parse_timestamp(raw: str) -> datetime:
    text = raw.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    return datetime.fromisoformat(text)


def parse_load_csv(path,
                   schema: tuple[str, str] = (CSV_TIMESTAMP_COLUMN, CSV_VALUE_COLUMN),
                   ) -> LoadSeries:
    """Read a two-column CSV into a LoadSeries.

    The resolution is inferred as the modal gap between consecutive
    readings; slots with no reading are left as NaN for resample_and_fill.
    """
    ts_col, val_col = schema
    rows: list[tuple[datetime, float]] = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptySeries(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        try:
            ts_idx = header.index(ts_col)
            val_idx = header.index(val_col)
        except ValueError:
            raise UnparseableRow(1, f"header must contain {ts_col!r} and {val_col!r}, "
                                    f"got {header}") from None
        for line_number, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) <= max(ts_idx, val_idx):
                raise UnparseableRow(line_number, f"expected {len(header)} columns, got {len(row)}")
            try:
                ts = _parse_timestamp(row[ts_idx])
            except ValueError as exc:
                raise UnparseableRow(line_number, f"bad timestamp {row[ts_idx]!r}: {exc}") from None
            try:
                value = float(row[val_idx])
            except ValueError:
                raise UnparseableRow(line_number, f"bad value {row[val_idx]!r}") from None
            if not math.isfinite(value):
                raise UnparseableRow(line_number, f"non-finite value {row[val_idx]!r}")
            if value < 0:
                raise NegativeReading(f"line {line_number}: negative reading {value}")
            if rows and (ts.tzinfo is None) != (rows[0][0].tzinfo is None):
                raise UnparseableRow(line_number, "mixed aware and naive timestamps")
            rows.append((ts, value))

    if not rows:
        raise EmptySeries(f"{path}: no data rows")

    rows.sort(key=lambda item: item[0])
    for (t_prev, _), (t_next, _) in zip(rows, rows[1:]):
        if t_next <= t_prev:
            raise NonMonotoneTimestamps(f"timestamp {t_next.isoformat()} repeats")

    start = rows[0][0]
    if len(rows) == 1:
        return LoadSeries(start_time=start, resolution=DEFAULT_RESOLUTION,
                          values=np.array([rows[0][1]]))

    gaps = [(b[0] - a[0]) for a, b in zip(rows, rows[1:])]
    counts: dict[timedelta, int] = {}
    for gap in gaps:
        counts[gap] = counts.get(gap, 0) + 1
    resolution = max(counts.items(), key=lambda kv: (kv[1], -kv[0].total_seconds()))[0]

    step = resolution.total_seconds()
    n_slots = int(round((rows[-1][0] - start).total_seconds() / step)) + 1
    values = np.full(n_slots, np.nan)
    for line_offset, (ts, value) in enumerate(rows):
        exact = (ts - start).total_seconds() / step
        slot = int(round(exact))
        if abs(exact - slot) > 1e-6 or slot >= n_slots:
            raise UnparseableRow(line_offset + 2,
                                 f"timestamp {ts.isoformat()} is not aligned with the "
                                 f"inferred {resolution} resolution")
        values[slot] = value
    return LoadSeries(start_time=start, resolution=resolution, values=values)


def write_load_csv(series: LoadSeries, path) -> None:
    """Write the series back out in the canonical two-column schema."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow([CSV_TIMESTAMP_COLUMN, CSV_VALUE_COLUMN])
        for i, value in enumerate(series.values):
            if np.isnan(value):
                continue
            writer.writerow([series.timestamp_at(i).isoformat(), repr(float(value))])


# --- gap filling ------------------------------------------------------------

def resample_and_fill(series: LoadSeries, max_gap: int) -> LoadSeries:
    """Fill interior missing runs of length <= max_gap by linear interpolation.

    Linear rather than forward fill: consumption is an intensity, and the
    linear ramp preserves short-gap totals better. Idempotent.
    """
    if series.is_gapless:
        return series
    values = series.values.copy()
    missing = np.isnan(values)
    if missing[0] or missing[-1]:
        raise ValueError("leading/trailing slots have no reading to interpolate from")

    idx = 0
    n = len(values)
    while idx < n:
        if not missing[idx]:
            idx += 1
            continue
        run_start = idx
        while idx < n and missing[idx]:
            idx += 1
        run_len = idx - run_start
        if run_len > max_gap:
            t0 = series.timestamp_at(run_start)
            t1 = series.timestamp_at(idx - 1)
            raise GapTooLarge(f"{run_len} consecutive missing slots "
                              f"({t0.isoformat()} .. {t1.isoformat()}) exceed max_gap={max_gap}")
        left = values[run_start - 1]
        right = values[idx]
        for k in range(run_len):
            frac = (k + 1) / (run_len + 1)
            values[run_start + k] = left + (right - left) * frac
    return LoadSeries(start_time=series.start_time, resolution=series.resolution,
                      values=values)


# --- day segmentation -------------------------------------------------------

@dataclass(frozen=True)
class DaySegmentation(Sequence):
    """Ordered complete days plus a report of what was dropped."""

    days: tuple[DaySample, ...]
    dropped_leading_slots: int
    dropped_trailing_slots: int
    dropped_anomalous_days: int

    def __len__(self) -> int:
        return len(self.days)

    def __getitem__(self, index):
        return self.days[index]

    def report(self) -> dict:
        return {
            "complete_days": len(self.days),
            "dropped_leading_slots": self.dropped_leading_slots,
            "dropped_trailing_slots": self.dropped_trailing_slots,
            "dropped_anomalous_days": self.dropped_anomalous_days,
        }


def segment_days(series: LoadSeries) -> DaySegmentation:
    """Cut a gapless series into complete calendar days."""
    if not series.is_gapless:
        raise ValueError("segment_days requires a gapless series; fill gaps first")
    rpd = readings_per_day(series.resolution)

    slot_days = [series.timestamp_at(i).date() for i in range(len(series))]
    days: list[DaySample] = []
    dropped_leading = 0
    dropped_trailing = 0
    dropped_anomalous = 0

    i = 0
    n = len(series)
    while i < n:
        d = slot_days[i]
        j = i
        while j < n and slot_days[j] == d:
            j += 1
        count = j - i
        midnight_aligned = series.timestamp_at(i).time() == datetime.min.time()
        if count == rpd and midnight_aligned:
            days.append(DaySample(day=d, readings=series.values[i:j].copy()))
        elif not days and j < n:
            dropped_leading += count
        elif j == n:
            dropped_trailing += count
        else:
            dropped_anomalous += 1
        i = j

    if not days:
        raise NoCompleteDay(f"series spans no complete day ({n} slots at {series.resolution})")
    return DaySegmentation(days=tuple(days),
                           dropped_leading_slots=dropped_leading,
                           dropped_trailing_slots=dropped_trailing,
                           dropped_anomalous_days=dropped_anomalous)


# --- chronological split ----------------------------------------------------

def split_dataset(days: Sequence[DaySample], spec: SplitSpec = SplitSpec(),
                  ) -> tuple[list[DaySample], list[DaySample], list[DaySample]]:
    """Chronological train/validation/test split; never shuffled.

    The first floor(train_fraction * n) days form the train pool and the
    rest is test; the last floor(pool * validation_fraction) days of the
    pool become validation, so tuning sees the most recent regime.
    """
    n = len(days)
    if n < 8:
        raise TooFewDays(f"need at least 8 days to split, got {n}")
    pool = int(math.floor(spec.train_fraction * n))
    n_val = int(math.floor(pool * spec.validation_fraction_of_train))
    train = list(days[: pool - n_val])
    validation = list(days[pool - n_val : pool])
    test = list(days[pool:])
    return train, validation, test


# --- synthetic drifting streams ----------------------------------------------

VALID_EVENT_KINDS = ("mean_shift", "scale_shift", "shape_swap")


@dataclass(frozen=True)
class DriftEvent:
    """A permanent change to the generating process from `day` onward.

    mean_shift adds `magnitude` kWh to every slot, scale_shift multiplies
    by `magnitude`, shape_swap rotates the daily shape by `magnitude` of a
    full day (0.5 swaps morning and evening).
    """

    day: int  # 1-based
    kind: str
    magnitude: float

    def __post_init__(self):
        if self.kind not in VALID_EVENT_KINDS:
            raise InvalidEvent(f"unknown event kind {self.kind!r}")


@dataclass(frozen=True)
class DailyProfile:
    """Smooth base shape: a flat base plus Gaussian usage bumps."""

    base: float = 10.0
    peaks: tuple[tuple[float, float, float], ...] = ((8.0, 2.0, 3.0), (19.0, 3.0, 5.0))

    def shape(self, rpd: int) -> np.ndarray:
        hours = np.arange(rpd) * (24.0 / rpd)
        values = np.full(rpd, float(self.base))
        for center, width, height in self.peaks:
            values += height * np.exp(-0.5 * ((hours - center) / width) ** 2)
        return values


def generate_synthetic(profile: DailyProfile,
                       drift_events: Sequence[DriftEvent],
                       noise_sd: float,
                       seed: int,
                       n_days: int,
                       resolution: timedelta = DEFAULT_RESOLUTION,
                       start_time: datetime = datetime(2024, 1, 1),
                       ) -> LoadSeries:
    """Deterministic drifting stream: stationary until each event's day."""
    if n_days < 1:
        raise ValueError(f"n_days must be >= 1, got {n_days}")
    for event in drift_events:
        if event.day < 1 or event.day > n_days:
            raise InvalidEvent(f"event day {event.day} outside 1..{n_days}")

    rpd = readings_per_day(resolution)
    rng = np.random.default_rng(seed)
    events = sorted(drift_events, key=lambda e: e.day)

    chunks = []
    for day_number in range(1, n_days + 1):
        shape = profile.shape(rpd)
        for event in events:
            if event.day > day_number:
                break
            if event.kind == "mean_shift":
                shape = shape + event.magnitude
            elif event.kind == "scale_shift":
                shape = shape * event.magnitude
            else:  # shape_swap
                shape = np.roll(shape, int(round(event.magnitude * rpd)))
        noise = rng.normal(0.0, noise_sd, rpd) if noise_sd > 0 else np.zeros(rpd)
        chunks.append(np.maximum(shape + noise, 0.0))

    return LoadSeries(start_time=start_time, resolution=resolution,
                      values=np.concatenate(chunks))
