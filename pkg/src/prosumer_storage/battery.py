"""Battery and converter model.

Sign convention: charging is positive.  ``x`` is the change in stored energy
over one step (kWh), ``p_b`` the active power the battery draws from the
grid side of the converter (kW), ``q_b`` its reactive power (kVAR).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError, ConstraintError, DomainError, InvariantError

# Absolute slack on the apparent-power check, kVA^2.
APPARENT_POWER_TOL = 1e-9
_RAMP_RTOL = 1e-9


@dataclass(frozen=True)
class BatterySpec:
    """Battery pack plus converter.

    Parameters
    ----------
    b_rated : float
        Rated capacity, kWh.
    b_min, b_max : float
        Usable charge window, kWh.
    delta_min, delta_max : float
        Maximum discharge (negative) and charge (positive) rates, kW.
    eta_ch, eta_dis : float
        Charging and discharging efficiencies in (0, 1].
    s_b_max : float
        Converter apparent-power rating, kVA.
    purchase_cost : float
        Purchase price in USD.
    rated_cycles : float
        Full-depth cycles over the battery's life.
    calendar_life_years : float
        Calendar life, years.
    """

    b_rated: float
    b_min: float
    b_max: float
    delta_min: float
    delta_max: float
    eta_ch: float = 1.0
    eta_dis: float = 1.0
    s_b_max: float = math.inf
    purchase_cost: float = 0.0
    rated_cycles: float = 0.0
    calendar_life_years: float = 10.0
    name: str = ""

    def __post_init__(self) -> None:
        if not 0 <= self.b_min <= self.b_max <= self.b_rated:
            raise ConfigError(
                f"need 0 <= b_min <= b_max <= b_rated, got {self.b_min}, {self.b_max}, {self.b_rated}"
            )
        if not self.delta_min < 0 < self.delta_max:
            raise ConfigError(f"need delta_min < 0 < delta_max, got {self.delta_min}, {self.delta_max}")
        for label, eta in (("eta_ch", self.eta_ch), ("eta_dis", self.eta_dis)):
            if not 0 < eta <= 1:
                raise ConfigError(f"{label} must lie in (0, 1], got {eta}")
        if self.s_b_max < 0:
            raise ConfigError(f"s_b_max must be >= 0, got {self.s_b_max}")

    @classmethod
    def from_soc(cls, b_rated: float, soc_min: float, soc_max: float, **kw) -> "BatterySpec":
        return cls(b_rated=b_rated, b_min=soc_min * b_rated, b_max=soc_max * b_rated, **kw)

    @classmethod
    def null(cls) -> "BatterySpec":
        """A battery that can neither store energy nor exchange power."""
        return cls(b_rated=0.0, b_min=0.0, b_max=0.0, delta_min=-1.0, delta_max=1.0, s_b_max=0.0, name="none")

    @property
    def soc_min(self) -> float:
        return self.b_min / self.b_rated if self.b_rated else 0.0

    @property
    def soc_max(self) -> float:
        return self.b_max / self.b_rated if self.b_rated else 0.0

    @property
    def window(self) -> float:
        return self.b_max - self.b_min

    @property
    def p_b_min(self) -> float:
        return self.delta_min * self.eta_dis

    @property
    def p_b_max(self) -> float:
        return self.delta_max / self.eta_ch

    def scaled(self, b_rated: float) -> "BatterySpec":
        """Same SoC window, efficiencies and ramps at a different capacity."""
        return BatterySpec.from_soc(
            b_rated,
            self.soc_min,
            self.soc_max,
            delta_min=self.delta_min,
            delta_max=self.delta_max,
            eta_ch=self.eta_ch,
            eta_dis=self.eta_dis,
            s_b_max=self.s_b_max,
            purchase_cost=self.purchase_cost,
            rated_cycles=self.rated_cycles,
            calendar_life_years=self.calendar_life_years,
            name=self.name,
        )


@dataclass(frozen=True)
class DispatchStep:
    x: float
    p_b: float
    q_b: float
    b_after: float


def full_charge_time(spec: BatterySpec) -> float:
    return spec.window / spec.delta_max


def full_discharge_time(spec: BatterySpec) -> float:
    return spec.window / abs(spec.delta_min)


def _check_ramp(x: float, h: float, spec: BatterySpec) -> None:
    rate = x / h
    if rate > spec.delta_max * (1 + _RAMP_RTOL):
        raise ConstraintError(f"charge rate {rate} kW exceeds delta_max {spec.delta_max} kW")
    if rate < spec.delta_min * (1 + _RAMP_RTOL):
        raise ConstraintError(f"discharge rate {rate} kW exceeds delta_min {spec.delta_min} kW")


def grid_power_of_delta(x: float, h: float, spec: BatterySpec) -> float:
    """Grid-side active power for a stored-energy change ``x`` over ``h`` hours.

    Charging draws ``x / eta_ch`` from the grid; discharging delivers
    ``|x| * eta_dis``.
    """
    _check_ramp(x, h, spec)
    if x >= 0:
        return x / (h * spec.eta_ch)
    return x * spec.eta_dis / h


def delta_of_grid_power(p_b: float, h: float, spec: BatterySpec) -> float:
    """Inverse of :func:`grid_power_of_delta`."""
    if p_b >= 0:
        return p_b * h * spec.eta_ch
    return p_b * h / spec.eta_dis


def reactive_headroom(p_b: float, spec: BatterySpec) -> float:
    """Reactive power still available on the converter at active output ``p_b``."""
    excess = p_b * p_b - spec.s_b_max * spec.s_b_max
    if excess > APPARENT_POWER_TOL:
        raise ConstraintError(f"|p_b| = {abs(p_b)} kW exceeds converter rating {spec.s_b_max} kVA")
    if math.isinf(spec.s_b_max):
        return math.inf
    return math.sqrt(max(-excess, 0.0))


def power_factor(p: float, q: float) -> float:
    """Signed power factor ``p / |s|``; negative while exporting."""
    s = math.hypot(p, q)
    if s == 0:
        raise DomainError("power factor undefined at zero apparent power")
    return p / s


def corrected_power_factor(p_load: float, q_load: float, p_b: float, q_b: float) -> float:
    return power_factor(p_load + p_b, q_load + q_b)


def check_step(step: DispatchStep, b_prev: float, h: float, spec: BatterySpec, index: int | None = None) -> None:
    """Raise :class:`InvariantError` if a dispatched step breaks a physical limit."""
    tol = 1e-9 * max(1.0, spec.b_rated)
    if not spec.b_min - tol <= step.b_after <= spec.b_max + tol:
        raise InvariantError(f"charge level {step.b_after} outside [{spec.b_min}, {spec.b_max}]", index)
    if abs(b_prev + step.x - step.b_after) > tol:
        raise InvariantError("charge ledger does not match stored delta", index)
    rate = step.x / h
    if not spec.delta_min * (1 + _RAMP_RTOL) - 1e-12 <= rate <= spec.delta_max * (1 + _RAMP_RTOL) + 1e-12:
        raise InvariantError(f"ramp {rate} kW outside [{spec.delta_min}, {spec.delta_max}]", index)
    if step.p_b**2 + step.q_b**2 > spec.s_b_max**2 + APPARENT_POWER_TOL:
        raise InvariantError(f"apparent power {math.hypot(step.p_b, step.q_b)} kVA exceeds rating", index)


def feasible_delta_range(b_prev: float, h: float, spec: BatterySpec) -> tuple[float, float]:
    """Interval of stored-energy changes allowed by ramp and capacity limits."""
    lo = max(spec.delta_min * h, spec.b_min - b_prev)
    hi = min(spec.delta_max * h, spec.b_max - b_prev)
    return min(lo, 0.0), max(hi, 0.0)


def stress(x, h: float) -> float:
    """Sum of squared ramp rates, a proxy for battery wear."""
    return math.fsum((xi / h) ** 2 for xi in x)
