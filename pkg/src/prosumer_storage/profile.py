"""Load profiles, schedule files and the synthetic monthly load generator."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError
from .tariff import MID_PEAK, OFF_PEAK, PEAK

PROFILE_COLUMNS = ("timestamp", "demand_kw", "generation_kw", "reactive_kvar")
SCHEDULE_COLUMNS = ("timestamp", "x_kwh", "p_b_kw", "q_b_kw", "b_kwh")

# Hour-of-day labels of the three-level time-of-use contract; used to shape
# synthetic load.
THREE_LEVEL_SCHEDULE = tuple(
    PEAK if 17 <= hr < 23 else OFF_PEAK if hr < 7 else MID_PEAK for hr in range(24)
)
NOMINAL_PERIOD_ENERGY = {PEAK: 200.0, MID_PEAK: 200.0, OFF_PEAK: 100.0}


@dataclass(frozen=True)
class LoadProfile:
    """Fixed-step time series of demand, generation and reactive power."""

    timestamps: tuple[datetime, ...]
    demand: np.ndarray
    generation: np.ndarray
    reactive: np.ndarray
    h: float

    def __post_init__(self) -> None:
        n = len(self.timestamps)
        for name in ("demand", "generation", "reactive"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise DataError(f"{name} has {arr.shape} samples, expected ({n},)")
            if not np.all(np.isfinite(arr)):
                raise DataError(f"{name} contains non-finite values")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "timestamps", tuple(self.timestamps))
        if self.h <= 0:
            raise DataError(f"step length must be positive, got {self.h}")

    def __len__(self) -> int:
        return len(self.timestamps)

    @property
    def net_load(self) -> np.ndarray:
        return self.demand - self.generation

    @property
    def hours(self) -> np.ndarray:
        return np.array([t.hour for t in self.timestamps], dtype=int)

    def with_reactive(self, reactive: np.ndarray) -> "LoadProfile":
        return LoadProfile(self.timestamps, self.demand, self.generation, np.asarray(reactive, float), self.h)

    def with_net_load(self, demand: np.ndarray, generation: np.ndarray) -> "LoadProfile":
        return LoadProfile(self.timestamps, demand, generation, self.reactive, self.h)


def regular_timestamps(start: datetime, n: int, h: float) -> tuple[datetime, ...]:
    step = timedelta(hours=h)
    return tuple(start + i * step for i in range(n))


def infer_step(timestamps: Sequence[datetime], source: str = "profile") -> float:
    if len(timestamps) < 2:
        raise DataError(f"{source}: need at least two samples to infer the step")
    step = timestamps[1] - timestamps[0]
    if step <= timedelta(0):
        raise DataError(f"{source}: timestamps must increase")
    for i in range(2, len(timestamps)):
        if timestamps[i] - timestamps[i - 1] != step:
            # +2: header line plus 1-based numbering
            raise DataError(f"{source}:{i + 2}: irregular step {timestamps[i] - timestamps[i - 1]} (expected {step})")
    return step.total_seconds() / 3600.0


def _read_rows(path: Path, columns: Sequence[str]):
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}:1: empty file")
        header = [c.strip() for c in header]
        missing = [c for c in columns if c not in header]
        if missing:
            raise DataError(f"{path}:1: missing columns {missing}")
        idx = [header.index(c) for c in columns]
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                ts = datetime.fromisoformat(row[idx[0]].strip())
                values = [float(row[j]) for j in idx[1:]]
            except (ValueError, IndexError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
            if not all(math.isfinite(v) for v in values):
                raise DataError(f"{path}:{lineno}: non-finite value")
            yield ts, values


def read_profile_csv(path: str | Path) -> LoadProfile:
    path = Path(path)
    rows = list(_read_rows(path, PROFILE_COLUMNS))
    if not rows:
        raise DataError(f"{path}: no samples")
    stamps = [r[0] for r in rows]
    h = infer_step(stamps, str(path))
    data = np.array([r[1] for r in rows], dtype=float)
    return LoadProfile(tuple(stamps), data[:, 0], data[:, 1], data[:, 2], h)


def write_profile_csv(profile: LoadProfile, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PROFILE_COLUMNS)
        for t, d, g, q in zip(profile.timestamps, profile.demand, profile.generation, profile.reactive):
            w.writerow([t.isoformat(), repr(float(d)), repr(float(g)), repr(float(q))])


def write_schedule_csv(timestamps, x, p_b, q_b, b, path: str | Path) -> None:
    """Write a dispatch schedule; floats use ``repr`` so they round-trip exactly."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SCHEDULE_COLUMNS)
        for row in zip(timestamps, x, p_b, q_b, b):
            w.writerow([row[0].isoformat()] + [repr(float(v)) for v in row[1:]])


def read_schedule_csv(path: str | Path) -> dict[str, np.ndarray | tuple]:
    path = Path(path)
    rows = list(_read_rows(path, SCHEDULE_COLUMNS))
    data = np.array([r[1] for r in rows], dtype=float).reshape(-1, 4)
    return {
        "timestamps": tuple(r[0] for r in rows),
        "x": data[:, 0],
        "p_b": data[:, 1],
        "q_b": data[:, 2],
        "b": data[:, 3],
    }


def _reactive_day_pattern(q1_factor: float) -> np.ndarray:
    """24 hourly multipliers with sum(|m|) / sum(m) == q1_factor.

    ``w`` hours sit at -1 and one more at ``-f``; solving
    ``q1 * (23 - 2w - f) = 23 + f`` for ``f`` in [0, 1].
    """
    if q1_factor < 1:
        raise DataError("absolute reactive total cannot be below the signed total")
    for w in range(12):
        f = (q1_factor * (23 - 2 * w) - 23) / (1 + q1_factor)
        if -1e-12 <= f <= 1 + 1e-12:
            f = min(max(f, 0.0), 1.0)
            pattern = np.ones(24)
            pattern[:w] = -1.0
            pattern[w] = -f
            return pattern
    raise DataError(f"q1_factor {q1_factor} too large for a one-day pattern")


def synthetic_profile(
    days: int = 30,
    reactive_share: float = 0.0,
    q1_factor: float = 1.2,
    period_energy: Mapping[str, float] = NOMINAL_PERIOD_ENERGY,
    schedule: Sequence[str] = THREE_LEVEL_SCHEDULE,
    start: datetime = datetime(2019, 1, 1),
) -> LoadProfile:
    """Hourly month with constant power inside each period.

    Active power in each period is chosen so the monthly totals equal
    ``period_energy``.  Reactive power is ``+a`` for most hours and ``-a``
    for a few, sized so that the signed monthly total is
    ``reactive_share * E_a`` and the absolute total is ``q1_factor`` times
    that.
    """
    n = 24 * days
    hours_per_period = {p: sum(1 for s in schedule if s == p) for p in period_energy}
    demand_day = np.array(
        [period_energy[s] / (hours_per_period[s] * days) if s in period_energy else 0.0 for s in schedule]
    )
    demand = np.tile(demand_day, days)

    sign_day = _reactive_day_pattern(q1_factor)
    e_total = sum(period_energy.values())
    a = reactive_share * e_total / (sign_day.sum() * days)
    reactive = np.tile(a * sign_day, days)
    return LoadProfile(regular_timestamps(start, n, 1.0), demand, np.zeros(n), reactive, 1.0)
