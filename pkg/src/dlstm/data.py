"""Daily load series: CSV ingestion, min-max scaling, sample windows, sharding.

A sample forecasts day ``d`` from nine history steps, each a
``(load, temperature, day_type / 2)`` triple: the seven days ``d-8 .. d-2``,
then ``d-2`` again and ``d-1``. The forecast day's temperature and day type
go to the readout as context.
"""

import csv
import datetime as dt
import math
from dataclasses import dataclass

import numpy as np

from .lstm import SequenceSample

HISTORY = 8
CSV_HEADER = ("date", "load", "temperature", "day_type")
DAY_TYPES = (0, 1, 2)  # workday, Saturday, Sunday/holiday


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class DailyRecord:
    date: dt.date
    load: float
    temperature: float
    day_type: int


def parse_series(path):
    """Read a ``date,load,temperature,day_type`` CSV into validated records.

    Dates must be ISO-8601, strictly consecutive days. Errors name the
    offending line.
    """
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise DataError(f"{path}: expected header {','.join(CSV_HEADER)}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 4:
                raise DataError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            try:
                date = dt.date.fromisoformat(row[0].strip())
                load = float(row[1])
                temp = float(row[2])
                day_type = int(row[3])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: malformed row ({exc})") from None
            if not (math.isfinite(load) and load > 0):
                raise DataError(f"{path}:{lineno}: load must be positive, got {row[1].strip()}")
            if not math.isfinite(temp):
                raise DataError(f"{path}:{lineno}: temperature is not finite")
            if day_type not in DAY_TYPES:
                raise DataError(f"{path}:{lineno}: unknown day_type {day_type}")
            if records:
                prev = records[-1].date
                if date <= prev:
                    raise DataError(f"{path}:{lineno}: date {date} is not after {prev}")
                if date != prev + dt.timedelta(days=1):
                    first = prev + dt.timedelta(days=1)
                    last = date - dt.timedelta(days=1)
                    span = str(first) if first == last else f"{first}..{last}"
                    raise DataError(f"{path}:{lineno}: missing dates {span}")
            records.append(DailyRecord(date, load, temp, day_type))
    return records


def write_series(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow([r.date.isoformat(), f"{r.load:.6f}", f"{r.temperature:.6f}", r.day_type])


@dataclass(frozen=True)
class Normalizer:
    """Per-feature min-max bounds (raw units)."""

    x_min: dict
    x_max: dict

    def apply(self, value, feature):
        lo, hi = self.x_min[feature], self.x_max[feature]
        return (np.asarray(value, dtype=float) - lo) / (hi - lo)

    def invert(self, value, feature):
        lo, hi = self.x_min[feature], self.x_max[feature]
        return np.asarray(value, dtype=float) * (hi - lo) + lo


def fit_normalizer(records):
    """Min-max bounds of load and temperature over ``records``.

    Fit on the training range only; out-of-range values are not clamped.
    """
    x_min, x_max = {}, {}
    for feature in ("load", "temperature"):
        values = [getattr(r, feature) for r in records]
        if not values:
            raise DataError("cannot fit a normalizer on no records")
        lo, hi = min(values), max(values)
        if not hi > lo:
            raise DataError(f"feature {feature!r} is constant ({lo}); cannot normalize")
        x_min[feature], x_max[feature] = lo, hi
    return Normalizer(x_min, x_max)


def build_samples(records, normalizer):
    """One sample per day that has eight days of history.

    Returns ``len(records) - 8`` samples in chronological order.
    """
    if len(records) < HISTORY + 1:
        raise DataError(f"need at least {HISTORY + 1} records, got {len(records)}")
    load = normalizer.apply([r.load for r in records], "load")
    temp = normalizer.apply([r.temperature for r in records], "temperature")
    dtype = np.array([r.day_type for r in records], dtype=float) / 2.0
    feats = np.stack([load, temp, dtype], axis=1)
    samples = []
    for d in range(HISTORY, len(records)):
        idx = list(range(d - 8, d - 1)) + [d - 2, d - 1]
        samples.append(SequenceSample(
            steps=feats[idx],
            readout_context=np.array([temp[d], dtype[d]]),
            target=load[d],
        ))
    return samples


@dataclass(frozen=True)
class Shard:
    """An agent's private, ordered slice of the samples."""

    samples: tuple
    provenance: str = ""

    def __len__(self):
        return len(self.samples)


def shard_dataset(samples, n_agents, strategy="contiguous"):
    """Split samples into ``n_agents`` disjoint shards.

    ``contiguous`` hands out consecutive blocks whose sizes differ by at most
    one (earlier agents take the remainder); ``round_robin`` sends sample
    ``k`` to agent ``k mod n_agents``.
    """
    samples = list(samples)
    n = len(samples)
    if n_agents < 1:
        raise DataError("n_agents must be at least 1")
    if n < n_agents:
        raise DataError(f"{n} samples cannot be split over {n_agents} agents")
    strategy = strategy.lower()
    if strategy == "contiguous":
        base, extra = divmod(n, n_agents)
        shards, start = [], 0
        for a in range(n_agents):
            size = base + (1 if a < extra else 0)
            shards.append(Shard(tuple(samples[start:start + size]),
                                f"contiguous[{start}:{start + size}]"))
            start += size
        return shards
    if strategy == "round_robin":
        return [Shard(tuple(samples[a::n_agents]), f"round_robin[{a}::{n_agents}]")
                for a in range(n_agents)]
    raise DataError(f"unknown shard strategy {strategy!r}")


def split_counts(n, fractions):
    """Chronological split sizes; the last part takes the rounding remainder."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise DataError(f"split fractions must sum to 1, got {fractions}")
    counts = [int(math.floor(f * n)) for f in fractions[:-1]]
    counts.append(n - sum(counts))
    return counts


def gen_synthetic(days, seed):
    """Synthetic daily load with annual, weekly and temperature effects.

    Day 0 is a Monday. Loads are clipped to stay positive.
    """
    if days < 30:
        raise DataError(f"need at least 30 days, got {days}")
    rng = np.random.default_rng(seed)
    d = np.arange(days)
    temp = 15.0 + 10.0 * np.sin(2 * np.pi * (d - 30) / 365.0) + rng.normal(0.0, 2.0, days)
    weekday = d % 7
    day_type = np.where(weekday < 5, 0, np.where(weekday == 5, 1, 2))
    weekly = np.choose(day_type, [1.0, 0.3, 0.0])
    load = (1000.0 + 200.0 * np.sin(2 * np.pi * d / 365.0) + 150.0 * weekly
            - 8.0 * (temp - 15.0) + rng.normal(0.0, 20.0, days))
    load = np.maximum(load, 1.0)
    start = dt.date(2016, 1, 4)  # a Monday
    return [DailyRecord(start + dt.timedelta(days=int(k)), float(load[k]),
                        float(temp[k]), int(day_type[k])) for k in d]
