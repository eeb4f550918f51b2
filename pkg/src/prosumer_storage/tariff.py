"""Low-voltage consumer contracts and monthly bill arithmetic.

Three contract families are supported:

* ``C1`` -- simple residential rate, either block-priced or at one flat rate.
* ``C2`` -- two-level time-of-use (peak / off-peak).
* ``C3`` -- three-level time-of-use (peak / mid-peak / off-peak).

Every bill is the sum of a fixed charge, a contracted-power charge, an
active-energy charge and a reactive-energy surcharge (or bonus).  The
reactive term is driven by the monthly reactive-to-active energy ratio via
the piecewise coefficient computed in :func:`kfac_from_ratio`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

from .errors import ConfigError, DomainError

PEAK = "peak"
MID_PEAK = "mid-peak"
OFF_PEAK = "off-peak"
PERIODS = (PEAK, MID_PEAK, OFF_PEAK)

# Monthly reactive/active ratio breakpoints: tan(arccos 0.92) and tan(arccos 0.82).
RATIO_THRESHOLD = 0.426
RATIO_HIGH_PENALTY = 0.7

SINGLE_PHASE_LEVELS = (3.7, 4.6, 7.4, 9.2)
THREE_PHASE_LEVELS = (12.0, 20.0, 25.0, 30.0, 35.0, 40.0)
ADMISSIBLE_POWER_LEVELS = SINGLE_PHASE_LEVELS + THREE_PHASE_LEVELS
MAX_CONTRACTED_POWER = 40.0

# Surcharge coefficient for C3 by supply voltage (kV upper bound, coefficient).
C3_COEFFICIENT_BY_VOLTAGE = ((0.4, 23.0), (22.0, 18.0), (31.5, 12.0))


class ContractKind(str, enum.Enum):
    C1 = "C1"
    C2 = "C2"
    C3 = "C3"

    @property
    def is_tou(self) -> bool:
        return self is not ContractKind.C1


def coefficient_for_voltage(kv: float) -> float:
    """Return the C3 surcharge coefficient for a supply voltage in kV."""
    for upper, coefficient in C3_COEFFICIENT_BY_VOLTAGE:
        if kv <= upper + 1e-9:
            return coefficient
    raise ConfigError(f"no surcharge coefficient tabulated for {kv} kV")


@dataclass(frozen=True)
class TariffContract:
    """One consumer contract.

    Parameters
    ----------
    kind : ContractKind
        Contract family.
    prices : mapping
        Energy price per period label in peso/kWh.  C1 uses the ``off-peak``
        entry for its flat rate; C2 bills mid-peak hours at the off-peak rate.
    period_schedule : sequence of str
        Period label for each hour of the day (24 entries).
    blocks : sequence of (upper bound kWh, price)
        C1 monthly consumption tiers; the last bound may be ``inf``.
    flat_rate_mode : bool
        Bill C1 at ``prices['off-peak']`` instead of the block tiers.
    period_durations : mapping
        Hours used by the controller as the peak and off-peak window lengths.
        Missing labels default to the number of scheduled hours.
    reactive_base : {"peak", "total"}
        C3 only: bill the surcharge against peak or total absolute energy.
    """

    kind: ContractKind
    name: str = ""
    prices: Mapping[str, float] = field(default_factory=dict)
    period_schedule: tuple[str, ...] = (OFF_PEAK,) * 24
    blocks: tuple[tuple[float, float], ...] = ()
    flat_rate_mode: bool = False
    power_charge_rate: float = 0.0
    fixed_monthly_charge: float = 0.0
    surcharge_coefficient: float | None = None
    contracted_power: float = 3.7
    nem_enabled: bool = False
    period_durations: Mapping[str, float] = field(default_factory=dict)
    reactive_base: str = "peak"

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ContractKind(self.kind))
        object.__setattr__(self, "period_schedule", tuple(self.period_schedule))
        object.__setattr__(self, "blocks", tuple((float(u), float(p)) for u, p in self.blocks))
        self._validate()

    def _validate(self) -> None:
        if len(self.period_schedule) != 24:
            raise ConfigError(f"period_schedule needs 24 hourly labels, got {len(self.period_schedule)}")
        bad = set(self.period_schedule) - set(PERIODS)
        if bad:
            raise ConfigError(f"unknown period labels {sorted(bad)}")
        for label, price in self.prices.items():
            if label not in PERIODS:
                raise ConfigError(f"unknown price label {label!r}")
            if price < 0:
                raise ConfigError(f"price for {label} must be >= 0, got {price}")
        for label in set(self.period_schedule):
            if label not in self.prices and not (self.kind is ContractKind.C2 and label == MID_PEAK):
                if self.kind is not ContractKind.C1 or self.flat_rate_mode:
                    raise ConfigError(f"no price for scheduled period {label!r}")

        if self.kind is ContractKind.C1:
            if not self.blocks and not self.flat_rate_mode:
                raise ConfigError("C1 needs block tiers or flat_rate_mode")
            if self.flat_rate_mode and OFF_PEAK not in self.prices:
                raise ConfigError("C1 flat_rate_mode needs a flat rate")
            bounds = [u for u, _ in self.blocks]
            if any(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:])):
                raise ConfigError(f"C1 block bounds must be strictly increasing, got {bounds}")
            if any(p < 0 for _, p in self.blocks):
                raise ConfigError("C1 block prices must be >= 0")
            if bounds and not math.isinf(bounds[-1]):
                raise ConfigError("last C1 block must be open-ended")
        else:
            if self.surcharge_coefficient is None:
                raise ConfigError(f"{self.kind.value} requires surcharge_coefficient")
            if not 0 <= self.surcharge_coefficient <= 100:
                raise ConfigError("surcharge_coefficient is a percentage in [0, 100]")
            for label in (PEAK, OFF_PEAK):
                if label not in self.prices:
                    raise ConfigError(f"{self.kind.value} needs a {label} price")
            if self.kind is ContractKind.C3 and MID_PEAK not in self.prices:
                raise ConfigError("C3 needs a mid-peak price")
            for label in (PEAK, OFF_PEAK):
                if self.period_duration(label) <= 0:
                    raise ConfigError(f"{label} window must be longer than zero hours")

        if self.reactive_base not in ("peak", "total"):
            raise ConfigError("reactive_base must be 'peak' or 'total'")
        self._validate_power()

    def _validate_power(self) -> None:
        p = self.contracted_power
        if not any(math.isclose(p, level) for level in ADMISSIBLE_POWER_LEVELS):
            raise ConfigError(f"contracted power {p} kW is not an admissible level {ADMISSIBLE_POWER_LEVELS}")
        if p > MAX_CONTRACTED_POWER:
            raise ConfigError(f"contracted power must be <= {MAX_CONTRACTED_POWER} kW")
        if self.kind is ContractKind.C2 and not p > 3.3:
            raise ConfigError("C2 requires contracted power above 3.3 kW")
        # C3 is nominally "above 3.7 kW"; 3.7 itself is accepted so the
        # smallest single-phase level stays usable.
        if self.kind is ContractKind.C3 and p < 3.7:
            raise ConfigError("C3 requires contracted power of at least 3.7 kW")

    # -- schedule helpers -------------------------------------------------

    def period_of_hour(self, hour: int) -> str:
        label = self.period_schedule[hour % 24]
        if self.kind is ContractKind.C2 and label == MID_PEAK:
            return OFF_PEAK
        return label

    def scheduled_hours(self, label: str) -> int:
        return sum(1 for h in range(24) if self.period_of_hour(h) == label)

    def period_duration(self, label: str) -> float:
        if label in self.period_durations:
            return float(self.period_durations[label])
        return float(self.scheduled_hours(label))

    def price(self, label: str) -> float:
        if self.kind is ContractKind.C1:
            return self.flat_rate
        if self.kind is ContractKind.C2 and label == MID_PEAK:
            label = OFF_PEAK
        return float(self.prices[label])

    @property
    def flat_rate(self) -> float:
        """Marginal C1 price used for dispatch decisions (flat rate or first tier)."""
        if OFF_PEAK in self.prices:
            return float(self.prices[OFF_PEAK])
        return self.blocks[0][1]

    def hourly_prices(self) -> list[float]:
        return [self.price(self.period_of_hour(h)) for h in range(24)]

    def with_options(self, **changes) -> "TariffContract":
        data = {k: getattr(self, k) for k in self.__dataclass_fields__}
        data.update(changes)
        return TariffContract(**data)


@dataclass(frozen=True)
class EnergyAggregates:
    """Monthly energy totals.

    Active totals are signed (negative under net metering when the period
    exported more than it imported).  ``er_q1`` accumulates the absolute
    reactive energy step by step.
    """

    ea_peak: float = 0.0
    ea_midpeak: float = 0.0
    ea_offpeak: float = 0.0
    er: float = 0.0
    er_q1: float = 0.0

    @property
    def ea_plus_peak(self) -> float:
        return abs(self.ea_peak)

    @property
    def ea_plus_midpeak(self) -> float:
        return abs(self.ea_midpeak)

    @property
    def ea_plus_offpeak(self) -> float:
        return abs(self.ea_offpeak)

    @property
    def ea(self) -> float:
        return self.ea_peak + self.ea_midpeak + self.ea_offpeak

    @property
    def ea_plus(self) -> float:
        return self.ea_plus_peak + self.ea_plus_midpeak + self.ea_plus_offpeak

    def as_dict(self) -> dict[str, float]:
        d = asdict(self)
        d.update(
            ea=self.ea,
            ea_plus=self.ea_plus,
            ea_plus_peak=self.ea_plus_peak,
            ea_plus_midpeak=self.ea_plus_midpeak,
            ea_plus_offpeak=self.ea_plus_offpeak,
        )
        return d


@dataclass(frozen=True)
class MonthlyBill:
    c_fixed: float
    c_power: float
    c_active: float
    c_reactive: float
    kfac: float

    @property
    def c_variable(self) -> float:
        return self.c_active + self.c_reactive

    @property
    def c_total(self) -> float:
        return self.c_fixed + self.c_power + self.c_active + self.c_reactive

    def as_dict(self) -> dict[str, float]:
        d = asdict(self)
        d.update(c_variable=self.c_variable, c_total=self.c_total)
        return d


def kfac_from_ratio(kind: ContractKind | str, ratio: float, coefficient: float | None = None) -> float:
    """Piecewise surcharge coefficient as a function of the monthly ratio.

    C1 is penalty-only (zero up to the 0.426 threshold, slopes 0.4 then 1.0).
    C2 and C3 are linear through zero at the threshold with slope
    ``coefficient / 100``, which yields a bonus below it, and slope 1.0 past
    the 0.7 breakpoint.
    """
    kind = ContractKind(kind)
    if kind is ContractKind.C1:
        if ratio <= RATIO_THRESHOLD:
            return 0.0
        k = 0.4 * (ratio - RATIO_THRESHOLD)
        if ratio > RATIO_HIGH_PENALTY:
            k += 0.6 * (ratio - RATIO_HIGH_PENALTY)
        return k
    if coefficient is None:
        raise ConfigError(f"{kind.value} surcharge needs a coefficient")
    a = coefficient / 100.0
    k = a * (ratio - RATIO_THRESHOLD)
    if ratio > RATIO_HIGH_PENALTY:
        k += (100.0 - coefficient) / 100.0 * (ratio - RATIO_HIGH_PENALTY)
    return k


def reactive_ratio(kind: ContractKind | str, agg: EnergyAggregates) -> float:
    kind = ContractKind(kind)
    if kind is ContractKind.C3:
        num, den, what = agg.er_q1, agg.ea_plus, "absolute active energy"
    else:
        num, den, what = agg.er, agg.ea, "active energy"
    if not den > 0:
        raise DomainError(f"monthly {what} is {den}; reactive ratio undefined")
    return num / den


def compute_kfac(contract: TariffContract, agg: EnergyAggregates) -> float:
    return kfac_from_ratio(contract.kind, reactive_ratio(contract.kind, agg), contract.surcharge_coefficient)


def monthly_power_factor(agg: EnergyAggregates, kind: ContractKind | str) -> float:
    ratio = reactive_ratio(kind, agg)
    return 1.0 / math.sqrt(1.0 + ratio * ratio)


def block_energy_cost(energy: float, blocks: Sequence[tuple[float, float]]) -> float:
    """Cost of ``energy`` kWh under increasing block tiers.

    A net-exporting month is credited at the first-tier rate.
    """
    if energy <= 0:
        return energy * blocks[0][1]
    cost, lower = 0.0, 0.0
    for upper, price in blocks:
        if energy <= lower:
            break
        cost += (min(energy, upper) - lower) * price
        lower = upper
    return cost


def active_energy_cost(contract: TariffContract, agg: EnergyAggregates) -> float:
    if contract.kind is ContractKind.C1:
        if contract.flat_rate_mode:
            return contract.flat_rate * agg.ea
        return block_energy_cost(agg.ea, contract.blocks)
    p = contract.prices
    if contract.kind is ContractKind.C2:
        return p[PEAK] * agg.ea_peak + p[OFF_PEAK] * (agg.ea_offpeak + agg.ea_midpeak)
    return p[PEAK] * agg.ea_peak + p[MID_PEAK] * agg.ea_midpeak + p[OFF_PEAK] * agg.ea_offpeak


def reactive_billing_base(contract: TariffContract, agg: EnergyAggregates) -> float:
    if contract.kind is ContractKind.C1:
        return agg.er
    if contract.kind is ContractKind.C2:
        return agg.ea_peak
    return agg.ea_plus_peak if contract.reactive_base == "peak" else agg.ea_plus


def reactive_energy_cost(contract: TariffContract, agg: EnergyAggregates, kfac: float) -> float:
    return kfac * reactive_billing_base(contract, agg)


def power_charge(contract: TariffContract) -> float:
    return contract.power_charge_rate * contract.contracted_power


def total_bill(contract: TariffContract, agg: EnergyAggregates) -> MonthlyBill:
    """Assemble the four bill components.

    A month with no active and no reactive energy at all carries no
    surcharge; any other month with an undefined ratio raises
    :class:`DomainError`.
    """
    idle = agg.er == 0 and agg.er_q1 == 0 and reactive_billing_base(contract, agg) == 0
    try:
        kfac = compute_kfac(contract, agg)
    except DomainError:
        if not idle:
            raise
        kfac = 0.0
    return MonthlyBill(
        c_fixed=contract.fixed_monthly_charge,
        c_power=power_charge(contract),
        c_active=active_energy_cost(contract, agg),
        c_reactive=reactive_energy_cost(contract, agg, kfac),
        kfac=kfac,
    )
