"""Month-long storage dispatch and billing.

:func:`run_month` walks a load profile step by step, asks the controller for
an active and then a reactive set-point, and bills the month twice: once for
the load alone (nominal) and once with the battery in place.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

import numpy as np

from . import battery as bat
from .battery import BatterySpec
from .controller import (
    ControlContext,
    Regime,
    arbitrage_delta,
    classify_regime,
    reactive_dispatch,
    self_consumption_delta,
)
from .errors import ConfigError, DataError, InvariantError
from .profile import LoadProfile
from .tariff import (
    MID_PEAK,
    OFF_PEAK,
    PEAK,
    EnergyAggregates,
    MonthlyBill,
    TariffContract,
    total_bill,
)


@dataclass(frozen=True)
class SimulationConfig:
    """Run parameters.

    ``b_0`` defaults to the battery's ``b_min``.  ``legacy_clipping`` keeps the
    stored delta unclipped when the converter limits grid power (the charge
    ledger then no longer matches the power that actually flowed).
    """

    h: float = 1.0
    n_month: int = 720
    b_0: float | None = None
    days_in_month: int = 30
    legacy_clipping: bool = False
    reactive_compensation: bool = True
    arbitrage: bool = True

    def __post_init__(self) -> None:
        if self.h <= 0:
            raise ConfigError("h must be positive")
        if self.n_month <= 0:
            raise ConfigError("n_month must be positive")
        if abs(self.h * self.n_month - 24 * self.days_in_month) > self.h + 1e-9:
            raise ConfigError(
                f"{self.n_month} steps of {self.h} h do not cover {self.days_in_month} days"
            )

    @classmethod
    def for_days(cls, days: int = 30, h: float = 1.0, **kw) -> "SimulationConfig":
        return cls(h=h, n_month=int(round(days * 24 / h)), days_in_month=days, **kw)


@dataclass(frozen=True)
class DispatchSchedule:
    timestamps: tuple
    x: np.ndarray
    p_b: np.ndarray
    q_b: np.ndarray
    b: np.ndarray
    b_0: float

    def __len__(self) -> int:
        return len(self.x)

    def step(self, i: int) -> bat.DispatchStep:
        return bat.DispatchStep(float(self.x[i]), float(self.p_b[i]), float(self.q_b[i]), float(self.b[i]))


@dataclass(frozen=True)
class SimulationResult:
    schedule: DispatchSchedule
    nominal_bill: MonthlyBill
    storage_bill: MonthlyBill
    nominal_aggregates: EnergyAggregates
    storage_aggregates: EnergyAggregates
    stress: float
    regime: Regime | None = None

    @property
    def profit(self) -> float:
        return self.nominal_bill.c_total - self.storage_bill.c_total

    @property
    def arbitrage_profit(self) -> float:
        """Saving on the active-energy charge alone."""
        return self.nominal_bill.c_active - self.storage_bill.c_active

    @property
    def reactive_profit(self) -> float:
        return self.nominal_bill.c_reactive - self.storage_bill.c_reactive

    @property
    def savings_pct(self) -> float:
        return 100.0 * self.profit / self.nominal_bill.c_total


def period_labels(profile: LoadProfile, contract: TariffContract) -> list[str]:
    labels = []
    for i, t in enumerate(profile.timestamps):
        label = contract.period_of_hour(t.hour)
        if label not in (PEAK, MID_PEAK, OFF_PEAK):
            raise ConfigError(f"sample {i}: unknown period label {label!r}")
        labels.append(label)
    return labels


def aggregate(
    p: Sequence[float],
    q: Sequence[float],
    labels: Sequence[str],
    h: float,
    nem: bool = True,
) -> EnergyAggregates:
    """Monthly per-period energy totals from per-step net power.

    Without net metering exported energy earns nothing, so negative steps are
    floored at zero before summing.
    """
    buckets: dict[str, list[float]] = {PEAK: [], MID_PEAK: [], OFF_PEAK: []}
    er, er_q1 = [], []
    for pi, qi, label in zip(p, q, labels):
        e = float(pi) * h
        if not nem and e < 0:
            e = 0.0
        try:
            buckets[label].append(e)
        except KeyError:
            raise ConfigError(f"unknown period label {label!r}") from None
        eq = float(qi) * h
        er.append(eq)
        er_q1.append(abs(eq))
    return EnergyAggregates(
        ea_peak=math.fsum(buckets[PEAK]),
        ea_midpeak=math.fsum(buckets[MID_PEAK]),
        ea_offpeak=math.fsum(buckets[OFF_PEAK]),
        er=math.fsum(er),
        er_q1=math.fsum(er_q1),
    )


def aggregate_profile(profile: LoadProfile, contract: TariffContract) -> EnergyAggregates:
    """Aggregates of the load alone, without any battery."""
    return aggregate(profile.net_load, profile.reactive, period_labels(profile, contract), profile.h, contract.nem_enabled)


def bill_with_battery(
    profile: LoadProfile, contract: TariffContract, p_b: Sequence[float], q_b: Sequence[float]
) -> tuple[EnergyAggregates, MonthlyBill]:
    """Bill the load plus a given battery power trace."""
    p = np.asarray(profile.net_load) + np.asarray(p_b, dtype=float)
    q = np.asarray(profile.reactive) + np.asarray(q_b, dtype=float)
    agg = aggregate(p, q, period_labels(profile, contract), profile.h, contract.nem_enabled)
    return agg, total_bill(contract, agg)


def _check_inputs(profile: LoadProfile, cfg: SimulationConfig) -> None:
    if len(profile) != cfg.n_month:
        raise DataError(f"profile has {len(profile)} samples, config expects {cfg.n_month}")
    if not math.isclose(profile.h, cfg.h, rel_tol=1e-9):
        raise DataError(f"profile step {profile.h} h differs from configured {cfg.h} h")


def run_month(
    profile: LoadProfile,
    contract: TariffContract,
    spec: BatterySpec,
    cfg: SimulationConfig | None = None,
) -> SimulationResult:
    if cfg is None:
        days = int(round(len(profile) * profile.h / 24))
        cfg = SimulationConfig(h=profile.h, n_month=len(profile), days_in_month=max(days, 1))
    _check_inputs(profile, cfg)
    h = cfg.h
    labels = period_labels(profile, contract)
    kind = contract.kind
    nem = contract.nem_enabled
    b = spec.b_min if cfg.b_0 is None else float(cfg.b_0)
    if not spec.b_min - 1e-12 <= b <= spec.b_max + 1e-12:
        raise ConfigError(f"initial charge {b} outside [{spec.b_min}, {spec.b_max}]")
    b_0 = b

    t_peak = contract.period_duration(PEAK) if kind.is_tou else 1.0
    t_off = contract.period_duration(OFF_PEAK) if kind.is_tou else 1.0
    regime = None
    if kind.is_tou:
        probe = ControlContext(kind, nem, OFF_PEAK, 0.0, t_peak, t_off, b, 0.0, 0.0, h)
        regime = classify_regime(spec, probe)

    prices = {label: contract.price(label) for label in (PEAK, MID_PEAK, OFF_PEAK) if label in set(labels)}
    n = cfg.n_month
    p_load = profile.net_load
    q_load = profile.reactive
    xs = np.zeros(n)
    pbs = np.zeros(n)
    qbs = np.zeros(n)
    bs = np.zeros(n)
    s_max = spec.s_b_max
    tol_b = 1e-9 * max(1.0, spec.b_rated)

    for i in range(n):
        p_i = float(p_load[i])
        q_i = float(q_load[i])
        label = labels[i]
        x = 0.0
        # C1 with net metering stays idle: arbitrage at a single price loses money.
        if cfg.arbitrage and (kind.is_tou or not nem):
            ctx = ControlContext(kind, nem, label, prices[label], t_peak, t_off, b, p_i, q_i, h)
            if kind.is_tou:
                x = arbitrage_delta(spec, ctx, regime) * h
            else:
                x = self_consumption_delta(spec, ctx)

        s = x / (h * spec.eta_ch) if x >= 0 else x * spec.eta_dis / h
        if abs(s) > s_max:
            p_b = math.copysign(s_max, s)
            if not cfg.legacy_clipping:
                x = bat.delta_of_grid_power(p_b, h, spec)
        else:
            p_b = s

        q_b = 0.0
        if cfg.reactive_compensation:
            q_b = reactive_dispatch(spec, p_b, q_i, kind, p_total=p_i + p_b)

        b_next = b + x
        if not (spec.b_min - tol_b <= b_next <= spec.b_max + tol_b):
            raise InvariantError(f"charge level {b_next} left [{spec.b_min}, {spec.b_max}]", i)
        if p_b * p_b + q_b * q_b > s_max * s_max + bat.APPARENT_POWER_TOL:
            raise InvariantError("converter apparent power exceeded", i)
        xs[i], pbs[i], qbs[i], bs[i] = x, p_b, q_b, b_next
        b = b_next

    schedule = DispatchSchedule(profile.timestamps, xs, pbs, qbs, bs, b_0)
    nominal_agg = aggregate(p_load, q_load, labels, h, nem)
    storage_agg = aggregate(p_load + pbs, q_load + qbs, labels, h, nem)
    return SimulationResult(
        schedule=schedule,
        nominal_bill=total_bill(contract, nominal_agg),
        storage_bill=total_bill(contract, storage_agg),
        nominal_aggregates=nominal_agg,
        storage_aggregates=storage_agg,
        stress=bat.stress(xs, h),
        regime=regime,
    )


@dataclass
class BatchCell:
    key: Any
    result: SimulationResult | None = None
    error: str | None = None


def _run_cell(args) -> BatchCell:
    key, profile, contract, spec, cfg = args
    try:
        return BatchCell(key, run_month(profile, contract, spec, cfg))
    except Exception as exc:  # reported per cell, the batch carries on
        return BatchCell(key, error=f"{type(exc).__name__}: {exc}")


def run_batch(tasks: Iterable[tuple], workers: int = 1) -> list[BatchCell]:
    """Run ``(key, profile, contract, spec, cfg)`` tasks, optionally in parallel.

    Results come back in task order regardless of ``workers``.
    """
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [_run_cell(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_cell, tasks))
