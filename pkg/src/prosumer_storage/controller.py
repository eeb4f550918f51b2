"""Hierarchical storage control.

Active power is decided first: greedy self-consumption for the flat-rate
contract without net metering, fixed arbitrage thresholds for the
time-of-use contracts.  Reactive compensation then uses whatever converter
capacity is left, one step at a time.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .battery import BatterySpec, full_charge_time, full_discharge_time, reactive_headroom
from .errors import PolicyError
from .tariff import MID_PEAK, OFF_PEAK, PEAK, RATIO_THRESHOLD, ContractKind


class Regime(enum.Enum):
    CASE1 = 1  # full charge in off-peak, full discharge in peak
    CASE2 = 2  # discharge is the bottleneck
    CASE3 = 3  # charge is the bottleneck
    CASE4 = 4  # both are


@dataclass(frozen=True)
class ControlContext:
    kind: ContractKind
    nem: bool
    period: str
    price: float
    t_peak: float
    t_offpeak: float
    b_prev: float
    p_load: float
    q_load: float
    h: float
    t_midpeak: float = 0.0


def classify_regime(spec: BatterySpec, ctx: ControlContext) -> Regime:
    # Equality counts as "cannot complete": the ramp-limited branch then runs
    # at full rate, which gives the same trajectory on the boundary.
    charge_ok = ctx.t_offpeak > full_charge_time(spec)
    discharge_ok = ctx.t_peak > full_discharge_time(spec)
    if charge_ok and discharge_ok:
        return Regime.CASE1
    if charge_ok:
        return Regime.CASE2
    if discharge_ok:
        return Regime.CASE3
    return Regime.CASE4


def arbitrage_delta(spec: BatterySpec, ctx: ControlContext, regime: Regime) -> float:
    """Ramp rate (kW) for the time-of-use arbitrage policy."""
    if ctx.period == MID_PEAK:
        return 0.0
    if ctx.period == PEAK:
        to_empty = (spec.b_min - ctx.b_prev) / ctx.h
        if regime in (Regime.CASE1, Regime.CASE3):
            return min(0.0, max(-spec.window / ctx.t_peak, to_empty, spec.delta_min))
        return min(0.0, max(spec.delta_min, to_empty))
    if ctx.period == OFF_PEAK:
        to_full = (spec.b_max - ctx.b_prev) / ctx.h
        if regime in (Regime.CASE1, Regime.CASE2):
            return max(0.0, min(spec.window / ctx.t_offpeak, to_full, spec.delta_max))
        return max(0.0, min(spec.delta_max, to_full))
    raise PolicyError(f"unknown period {ctx.period!r}")


def self_consumption_delta(spec: BatterySpec, ctx: ControlContext) -> float:
    """Stored-energy change (kWh) that soaks up surplus or covers load locally."""
    if ctx.kind is not ContractKind.C1 or ctx.nem:
        raise PolicyError("self-consumption policy applies to C1 without net metering only")
    p, h = ctx.p_load, ctx.h
    if p >= 0:
        x = max(-p * h / spec.eta_dis, spec.delta_min * h, spec.b_min - ctx.b_prev)
        return min(x, 0.0)
    x = min(-p * h * spec.eta_ch, spec.delta_max * h, spec.b_max - ctx.b_prev)
    return max(x, 0.0)


def reactive_dispatch(
    spec: BatterySpec,
    p_b: float,
    q_load: float,
    kind: ContractKind | str,
    p_total: float | None = None,
) -> float:
    """Reactive output that cancels load reactive power within converter headroom.

    For C1 only the part of ``q_load`` above ``0.426 * |p_total|`` is
    compensated, since there is no reward for a power factor above 0.92.
    ``p_total`` is the net active power seen by the meter including the
    battery; with ``p_total == 0`` C1 compensates fully.
    """
    kind = ContractKind(kind)
    headroom = reactive_headroom(p_b, spec)
    if q_load == 0:
        return 0.0
    need = abs(q_load)
    if kind is ContractKind.C1:
        if p_total is None:
            raise PolicyError("C1 reactive dispatch needs the net active power")
        need = max(0.0, need - RATIO_THRESHOLD * abs(p_total))
    return -math.copysign(min(need, headroom), q_load)
