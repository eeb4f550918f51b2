"""Brute-force dynamic-programming reference for battery arbitrage.

The charge level is discretised on a uniform grid over ``[b_min, b_max]``
and every ramp-feasible transition between grid levels is enumerated at
every step.  On the grid the result is exact, which makes it a check on
the threshold controller that does not share any of its logic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from .battery import BatterySpec
from .errors import ConfigError
from .profile import LoadProfile, regular_timestamps
from .simulator import SimulationConfig, run_month
from .tariff import TariffContract

MAX_HORIZON_HOURS = 7 * 24


@dataclass(frozen=True)
class OracleInstance:
    """Arbitrage problem on a charge grid.

    ``sell`` defaults to ``buy`` (net metering).  ``load`` is the net active
    load in kW; when given the DP minimises the whole bill rather than the
    battery's own trades.  Stored energy left at the end is credited at
    ``terminal_price`` per kWh above ``b_0``.
    """

    buy: np.ndarray
    spec: BatterySpec
    h: float = 1.0
    levels: int = 201
    sell: np.ndarray | None = None
    b_0: float | None = None
    terminal_price: float = 0.0
    load: np.ndarray | None = None

    def __post_init__(self) -> None:
        buy = np.asarray(self.buy, dtype=float)
        object.__setattr__(self, "buy", buy)
        sell = buy if self.sell is None else np.asarray(self.sell, dtype=float)
        object.__setattr__(self, "sell", sell)
        if sell.shape != buy.shape:
            raise ConfigError("buy and sell price vectors differ in length")
        if self.load is not None:
            object.__setattr__(self, "load", np.asarray(self.load, dtype=float))
            if self.load.shape != buy.shape:
                raise ConfigError("load and price vectors differ in length")
        if self.levels < 2:
            raise ConfigError("charge grid needs at least two levels")
        if len(buy) * self.h > MAX_HORIZON_HOURS + 1e-9:
            raise ConfigError(f"horizon {len(buy) * self.h} h exceeds {MAX_HORIZON_HOURS} h")

    @property
    def n(self) -> int:
        return len(self.buy)

    def with_load(self, load) -> "OracleInstance":
        return OracleInstance(self.buy, self.spec, self.h, self.levels, self.sell, self.b_0, self.terminal_price, load)


@dataclass
class DPResult:
    profit: float
    x: np.ndarray
    b: np.ndarray
    b_0: float
    snap: float = 0.0
    objective: float = 0.0  # total cost of the bill when a load was given
    battery_objective: float = 0.0  # sum of battery power x price x h
    meta: dict = field(default_factory=dict)


def grid_energy(x: np.ndarray, spec: BatterySpec) -> np.ndarray:
    """Grid-side energy of stored deltas ``x`` (charging positive)."""
    return np.where(x >= 0, x / spec.eta_ch, x * spec.eta_dis)


def step_cost(net_energy: np.ndarray, buy: float, sell: float) -> np.ndarray:
    return np.where(net_energy >= 0, buy * net_energy, sell * net_energy)


def dp_optimal_profit(inst: OracleInstance) -> DPResult:
    """Maximum arbitrage profit over ramp-, capacity- and converter-feasible schedules.

    Profit is the money earned by the battery's own trades plus the terminal
    credit.  With a load attached the DP instead minimises the total bill and
    ``profit`` is the saving against the load alone.  Ties are broken toward
    the smallest move so that equal-value problems give identical schedules.
    """
    spec, h, n = inst.spec, inst.h, inst.n
    window = spec.window
    b_0 = spec.b_min if inst.b_0 is None else float(inst.b_0)
    if window <= 0:
        zeros = np.zeros(n)
        base = _load_cost(inst, zeros)
        return DPResult(0.0, zeros, np.full(n, b_0), b_0, abs(b_0 - spec.b_min), base, 0.0)

    levels = inst.levels
    step = window / (levels - 1)
    grid = spec.b_min + step * np.arange(levels)
    j0 = int(round((b_0 - spec.b_min) / step))
    j0 = min(max(j0, 0), levels - 1)
    snap = abs(grid[j0] - b_0)
    b_start = grid[j0]

    moves = (np.arange(levels)[None, :] - np.arange(levels)[:, None]) * step  # x[j, k]
    eps = 1e-9 * max(1.0, window)
    feasible = (moves <= spec.delta_max * h + eps) & (moves >= spec.delta_min * h - eps)
    e_grid = grid_energy(moves, spec)
    if math.isfinite(spec.s_b_max):
        feasible &= np.abs(e_grid / h) <= spec.s_b_max + 1e-12
    load_e = None if inst.load is None else inst.load * h

    def reward(t: int) -> np.ndarray:
        if load_e is None:
            r = -step_cost(e_grid, inst.buy[t], inst.sell[t])
        else:
            r = -step_cost(load_e[t] + e_grid, inst.buy[t], inst.sell[t])
        return np.where(feasible, r, -np.inf)

    value = np.empty((n + 1, levels))
    value[n] = inst.terminal_price * (grid - b_start)
    for t in range(n - 1, -1, -1):
        value[t] = np.max(reward(t) + value[t + 1][None, :], axis=1)

    # Forward pass with deterministic tie-breaking.
    j = j0
    xs = np.zeros(n)
    bs = np.zeros(n)
    dist = np.abs(np.arange(levels))
    for t in range(n):
        q = reward(t)[j] + value[t + 1]
        best = q.max()
        tol = 1e-9 * (1.0 + abs(best))
        cands = np.flatnonzero(q >= best - tol)
        k = cands[np.lexsort((cands, dist[np.abs(cands - j)]))][0]
        xs[t] = (k - j) * step
        bs[t] = grid[k]
        j = k

    battery_obj = float(np.sum(_battery_cost(xs, inst)))
    terminal = inst.terminal_price * (bs[-1] - b_start) if n else 0.0
    if inst.load is None:
        profit = -_battery_cost(xs, inst).sum() + terminal
        objective = float(-profit)
    else:
        objective = _load_cost(inst, xs)
        profit = _load_cost(inst, np.zeros(n)) - objective + terminal
    return DPResult(float(profit), xs, bs, float(b_start), float(snap), float(objective), battery_obj)


def _battery_cost(x: np.ndarray, inst: OracleInstance) -> np.ndarray:
    return step_cost(grid_energy(x, inst.spec), inst.buy, inst.sell)


def _load_cost(inst: OracleInstance, x: np.ndarray) -> float:
    if inst.load is None:
        return 0.0
    net = inst.load * inst.h + grid_energy(x, inst.spec)
    return float(np.sum(step_cost(net, inst.buy, inst.sell)))


def schedule_profit(x, prices, spec: BatterySpec, sell=None, terminal_price: float = 0.0) -> float:
    """Money made by the battery's own trades for a given stored-delta schedule."""
    x = np.asarray(x, dtype=float)
    buy = np.asarray(prices, dtype=float)
    sell = buy if sell is None else np.asarray(sell, dtype=float)
    return float(-np.sum(step_cost(grid_energy(x, spec), buy, sell)) + terminal_price * np.sum(x))


# -- controller versus oracle ------------------------------------------------


def contract_price_vector(contract: TariffContract, days: int, h: float = 1.0, start: datetime = datetime(2019, 1, 1)):
    stamps = regular_timestamps(start, int(round(days * 24 / h)), h)
    return stamps, np.array([contract.price(contract.period_of_hour(t.hour)) for t in stamps])


@dataclass(frozen=True)
class OptimalityReport:
    dp_profit: float
    controller_profit: float
    gap: float
    bound: float
    regime: object = None

    @property
    def passed(self) -> bool:
        return self.gap <= self.bound


def verify_threshold_optimality(
    contract: TariffContract,
    spec: BatterySpec,
    days: int = 1,
    h: float = 1.0,
    levels: int = 201,
) -> OptimalityReport:
    """Compare the controller's arbitrage profit with the DP optimum.

    Both start at ``b_min`` and leftover charge is credited at the cheapest
    way to have bought it (lowest price over ``eta_ch``), so neither side is
    penalised for a horizon that ends mid-cycle.
    """
    stamps, prices = contract_price_vector(contract, days, h)
    n = len(stamps)
    zeros = np.zeros(n)
    profile = LoadProfile(stamps, zeros, zeros, zeros, h)
    cfg = SimulationConfig.for_days(days, h, reactive_compensation=False)
    sim = run_month(profile, contract.with_options(nem_enabled=True), spec, cfg)
    terminal = float(prices.min()) / spec.eta_ch
    ctrl = schedule_profit(sim.schedule.x, prices, spec, terminal_price=terminal)
    inst = OracleInstance(prices, spec, h, levels, terminal_price=terminal)
    dp = dp_optimal_profit(inst)
    bound = spec.window / levels * float(prices.max())
    return OptimalityReport(dp.profit, ctrl, dp.profit - ctrl, bound, sim.regime)


def verify_load_independence(inst: OracleInstance, profiles, rtol: float = 1e-9) -> bool:
    """Check that the optimal battery schedule ignores the load.

    For each load the DP is solved on the full bill.  Independence holds when
    every schedule equals the battery-only schedule and each bill differs
    from the battery-only objective by exactly the cost of the load itself.
    """
    base = dp_optimal_profit(OracleInstance(inst.buy, inst.spec, inst.h, inst.levels, inst.sell, inst.b_0))
    battery_only = float(np.sum(_battery_cost(base.x, inst)))
    for load in profiles:
        load = np.asarray(load, dtype=float)
        res = dp_optimal_profit(inst.with_load(load))
        if not np.array_equal(res.x, base.x):
            return False
        load_cost = float(np.sum(step_cost(load * inst.h, inst.buy, inst.sell)))
        gap = res.objective - battery_only
        if not math.isclose(gap, load_cost, rel_tol=rtol, abs_tol=rtol * max(1.0, abs(res.objective))):
            return False
    return True


def random_feasible_schedules(spec: BatterySpec, n: int, count: int, h: float = 1.0, rng=None, b_0=None) -> np.ndarray:
    """``count`` random stored-delta schedules that respect ramp and capacity limits."""
    rng = np.random.default_rng(rng)
    b = np.full(count, spec.b_min if b_0 is None else b_0, dtype=float)
    xs = np.empty((count, n))
    for t in range(n):
        lo = np.minimum(np.maximum(spec.delta_min * h, spec.b_min - b), 0.0)
        hi = np.maximum(np.minimum(spec.delta_max * h, spec.b_max - b), 0.0)
        x = lo + (hi - lo) * rng.random(count)
        # A share of steps sit exactly on a bound, as optimal schedules do.
        pick = rng.random(count)
        x = np.where(pick < 0.15, lo, np.where(pick < 0.3, hi, np.where(pick < 0.4, 0.0, x)))
        xs[:, t] = x
        b = b + x
    return xs


# -- randomized instances -----------------------------------------------------


@dataclass(frozen=True)
class RandomTouProblem:
    seed: int
    contract: TariffContract
    spec: BatterySpec
    days: int
    target: int  # intended regime number


def random_tou_problem(seed: int, regime: int, three_level: bool = False, levels: int = 201) -> RandomTouProblem:
    """Random time-of-use problem whose battery falls in the requested regime.

    Ramp limits are whole multiples of the oracle's grid step, so a schedule
    that saturates them is representable on the grid.  Prices always leave a
    profitable peak/off-peak spread.  Three-level instances are only
    generated for regime 1.
    """
    from .config import load_tariff
    from .tariff import MID_PEAK, OFF_PEAK, PEAK

    rng = np.random.default_rng(seed)
    base = load_tariff("c3" if three_level else "c2")
    if three_level and regime != 1:
        raise ConfigError("three-level instances are generated for regime 1 only")
    t_off = base.period_duration(OFF_PEAK)
    t_peak = base.period_duration(PEAK)
    cells = levels - 1
    fast_charge = int(math.floor(cells / t_off)) + 1
    fast_discharge = int(math.floor(cells / t_peak)) + 1
    charge_ok = regime in (1, 2)
    discharge_ok = regime in (1, 3)
    kc = int(rng.integers(fast_charge, 4 * fast_charge)) if charge_ok else int(rng.integers(2, fast_charge))
    kd = int(rng.integers(fast_discharge, 4 * fast_discharge)) if discharge_ok else int(rng.integers(2, fast_discharge))

    window = float(rng.uniform(1.0, 15.0))
    soc_min = float(rng.uniform(0.05, 0.3))
    soc_max = float(rng.uniform(0.85, 1.0))
    b_rated = window / (soc_max - soc_min)
    eta_ch, eta_dis = (float(v) for v in rng.uniform(0.85, 1.0, size=2))
    step = window / cells
    spec = BatterySpec(
        b_rated=b_rated,
        b_min=soc_min * b_rated,
        b_max=soc_min * b_rated + window,
        delta_min=-kd * step,
        delta_max=kc * step,
        eta_ch=eta_ch,
        eta_dis=eta_dis,
        s_b_max=2.0 * max(kc * step / eta_ch, kd * step),
        name=f"random-{seed}",
    )
    off = float(rng.uniform(0.5, 5.0))
    peak = off / (eta_ch * eta_dis) * float(rng.uniform(1.1, 4.0))
    prices = {PEAK: peak, OFF_PEAK: off}
    if three_level:
        prices[MID_PEAK] = float(rng.uniform(off, peak))
    contract = base.with_options(prices=prices, nem_enabled=True)
    days = int(rng.integers(1, 3))
    return RandomTouProblem(seed, contract, spec, days, regime)


def random_tou_suite(seed: int, count: int = 60) -> list[RandomTouProblem]:
    """``count`` problems cycling through regimes 1-4, every fifth one three-level."""
    problems = []
    for i in range(count):
        if i % 5 == 4:
            problems.append(random_tou_problem(seed + i, 1, three_level=True))
        else:
            problems.append(random_tou_problem(seed + i, (i % 4) + 1))
    return problems


# -- verification suite -----------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seed: int | None = None
    expected_break: bool = False


def single_price_check(spec: BatterySpec, price: float = 5.160, hours: int = 24, count: int = 10_000, seed: int = 0) -> CheckResult:
    """Single-price arbitrage never pays: DP optimum is zero, random schedules lose."""
    buy = np.full(hours, price)
    dp = dp_optimal_profit(OracleInstance(buy, spec))
    xs = random_feasible_schedules(spec, hours, count, rng=seed)
    profits = -np.sum(step_cost(grid_energy(xs, spec), buy, buy), axis=1)
    worst = float(profits.max()) if count else 0.0
    ok = dp.profit == 0.0 and worst <= 0.0
    return CheckResult("single-price", ok, f"dp profit {dp.profit!r}, best random {worst!r} over {count}", seed)


def random_loads(n: int, count: int, rng) -> list[np.ndarray]:
    """Net loads mixing import and export, as demand minus solar-like generation."""
    rng = np.random.default_rng(rng)
    hours = np.arange(n) % 24
    sun = np.clip(np.sin((hours - 6) / 12 * np.pi), 0, None)
    return [rng.uniform(0, 4, n) - rng.uniform(0, 6) * sun for _ in range(count)]


def load_independence_check(contract: TariffContract, spec: BatterySpec, count: int = 100, seed: int = 0, sell_ratio: float = 1.0) -> CheckResult:
    _, buy = contract_price_vector(contract, 1)
    sell = buy * sell_ratio
    inst = OracleInstance(buy, spec, sell=sell, terminal_price=0.0)
    loads = random_loads(len(buy), count, seed)
    ok = verify_load_independence(inst, loads)
    name = "load-independence" if sell_ratio == 1.0 else f"load-independence sell={sell_ratio:g}*buy"
    return CheckResult(name, ok, f"{count} loads, {contract.kind.value}", seed, expected_break=sell_ratio != 1.0)


def run_verification(seed: int = 0, count: int = 60, spec: BatterySpec | None = None, workers: int = 1) -> list[CheckResult]:
    """Threshold optimality, single-price zero profit and load independence.

    Stops the optimality sweep at the first failing instance so its seed can
    be replayed with :func:`random_tou_problem`.
    """
    from .config import load_battery, load_tariff

    spec = spec or load_battery("powerwall1")
    out = []
    failure = None
    worst = 0.0
    for prob in random_tou_suite(seed, count):
        rep = verify_threshold_optimality(prob.contract, prob.spec, prob.days)
        worst = max(worst, rep.gap / rep.bound if rep.bound else rep.gap)
        if not rep.passed or rep.regime is None or rep.regime.value != prob.target:
            failure = CheckResult(
                "threshold-optimality", False,
                f"instance seed {prob.seed}: gap {rep.gap:.6g} > bound {rep.bound:.6g} (regime {rep.regime}, wanted {prob.target})",
                prob.seed,
            )
            break
    out.append(failure or CheckResult("threshold-optimality", True, f"{count} instances, worst gap/bound {worst:.3g}", seed))
    out.append(single_price_check(spec, seed=seed))
    for name in ("c2", "c3"):
        out.append(load_independence_check(load_tariff(name), spec, count=20, seed=seed))
    out.append(load_independence_check(load_tariff("c3"), spec, count=20, seed=seed, sell_ratio=0.5))
    return out
