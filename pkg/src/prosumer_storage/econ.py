"""Arbitrage potential, per-cycle profitability and contract ranking."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

from .battery import BatterySpec
from .errors import DomainError
from .profile import LoadProfile
from .simulator import SimulationConfig, run_batch
from .tariff import OFF_PEAK, PEAK, TariffContract

# USD per peso implied by the peso and dollar rows of the profitability table.
DEFAULT_FX = 0.02973


def arbitrage_gain_per_day(spec: BatterySpec, peak_price: float, offpeak_price: float) -> float:
    """Profit of one full daily cycle: sell the window at peak, buy it back off-peak."""
    window = (spec.soc_max - spec.soc_min) * spec.b_rated
    return window * (peak_price * spec.eta_dis - offpeak_price / spec.eta_ch)


def contract_gain_per_day(spec: BatterySpec, contract: TariffContract) -> float:
    return arbitrage_gain_per_day(spec, contract.price(PEAK), contract.price(OFF_PEAK))


def arbitrage_profitable(p_buy: float, p_sell: float, eta_ch: float, eta_dis: float) -> bool:
    """True if energy bought at ``p_buy`` and later sold at ``p_sell`` makes money."""
    return p_sell * eta_dis > p_buy / eta_ch


@dataclass(frozen=True)
class EconReport:
    g_arb_per_day: float
    monthly_gain: float
    cycles_per_day: float
    cycles_per_month: float
    gain_per_cycle: float
    required_per_cycle: float
    profitable: bool
    payback_months: int | None
    fx_rate: float

    @property
    def monthly_gain_usd(self) -> float:
        return self.monthly_gain * self.fx_rate

    def as_dict(self) -> dict:
        d = asdict(self)
        d["monthly_gain_usd"] = self.monthly_gain_usd
        d["payback"] = "never within life" if self.payback_months is None else self.payback_months
        return d


def cycle_economics(
    spec: BatterySpec,
    monthly_gain: float,
    fx_rate: float = DEFAULT_FX,
    days: int = 30,
    cycles_per_month: float | None = None,
) -> EconReport:
    """Dollar gain per full-depth cycle against the battery's cost per cycle.

    By default the battery does one cycle per day at depth ``soc_max -
    soc_min``; ``cycles_per_month`` overrides that count.
    """
    cycles_per_day = spec.soc_max - spec.soc_min
    if cycles_per_month is None:
        cycles_per_month = cycles_per_day * days
    else:
        cycles_per_day = cycles_per_month / days
    if cycles_per_month <= 0:
        raise DomainError("battery performs no cycles; per-cycle gain undefined")
    if spec.rated_cycles <= 0:
        raise DomainError("rated_cycles must be positive")
    gain_usd = monthly_gain * fx_rate
    gain_per_cycle = gain_usd / cycles_per_month
    required = spec.purchase_cost / spec.rated_cycles
    profitable = gain_per_cycle > required
    payback = None
    if profitable and gain_usd > 0:
        months = math.ceil(spec.purchase_cost / gain_usd)
        if months <= spec.calendar_life_years * 12:
            payback = months
    g_day = monthly_gain / days
    return EconReport(g_day, monthly_gain, cycles_per_day, cycles_per_month, gain_per_cycle, required, profitable, payback, fx_rate)


def potential_table(
    sizes: Sequence[float],
    contracts: Sequence[TariffContract],
    template: BatterySpec,
    days: int = 30,
) -> list[dict]:
    """Monthly arbitrage gain for each battery size under each contract."""
    rows = []
    for size in sizes:
        spec = template.scaled(size)
        row = {"b_rated": size}
        for c in contracts:
            row[c.name or c.kind.value] = days * contract_gain_per_day(spec, c) if size > 0 else 0.0
        rows.append(row)
    return rows


@dataclass(frozen=True)
class Recommendation:
    contract: TariffContract
    battery: BatterySpec | None
    total_cost: float | None
    profit: float | None
    stress: float | None
    error: str | None = None

    @property
    def label(self) -> str:
        name = self.contract.name or self.contract.kind.value
        return f"{name} + {self.battery.name or 'battery'}" if self.battery else f"{name} (no storage)"


def recommend_contract(
    profile: LoadProfile,
    specs: Sequence[BatterySpec],
    contracts: Sequence[TariffContract],
    cfg: SimulationConfig | None = None,
    workers: int = 1,
) -> list[Recommendation]:
    """Simulate every contract/battery pair and rank by total bill.

    With no batteries the ranking is over nominal bills.  Failed cells are
    returned at the end with their error message.
    """
    if not contracts:
        raise ValueError("need at least one contract")
    options: list[BatterySpec | None] = list(specs) or [None]
    tasks = []
    for ci, contract in enumerate(contracts):
        for si, spec in enumerate(options):
            tasks.append(((ci, si), profile, contract, spec or BatterySpec.null(), cfg))
    cells = run_batch(tasks, workers)
    ranked, failed = [], []
    for cell in cells:
        ci, si = cell.key
        contract, spec = contracts[ci], options[si]
        if cell.result is None:
            failed.append(Recommendation(contract, spec, None, None, None, cell.error))
            continue
        r = cell.result
        bill = r.storage_bill if spec is not None else r.nominal_bill
        ranked.append(Recommendation(contract, spec, bill.c_total, r.profit if spec else 0.0, r.stress))
    ranked.sort(key=lambda rec: (rec.total_cost, rec.stress))
    return ranked + failed
