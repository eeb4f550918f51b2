import numpy as np
import pytest

from prosumer_storage.battery import BatterySpec
from prosumer_storage.controller import Regime
from prosumer_storage.errors import ConfigError
from prosumer_storage.oracle import (
    OracleInstance,
    dp_optimal_profit,
    load_independence_check,
    random_feasible_schedules,
    random_tou_problem,
    run_verification,
    schedule_profit,
    single_price_check,
    verify_load_independence,
    verify_threshold_optimality,
)


def unit(eta=1.0):
    return BatterySpec(b_rated=1, b_min=0, b_max=1, delta_min=-1, delta_max=1, eta_ch=eta, eta_dis=eta)


class TestDP:
    def test_two_step(self):
        r = dp_optimal_profit(OracleInstance(np.array([1.0, 2.0]), unit()))
        assert r.profit == pytest.approx(1.0)
        assert np.allclose(r.x, [1, -1])

    def test_two_step_lossy(self):
        r = dp_optimal_profit(OracleInstance(np.array([1.0, 2.0]), unit(0.5)))
        assert r.profit == 0.0
        assert np.all(r.x == 0)

    def test_constant_prices(self, pw1):
        assert dp_optimal_profit(OracleInstance(np.full(24, 3.0), pw1)).profit == 0.0

    def test_snap_recorded(self):
        r = dp_optimal_profit(OracleInstance(np.array([1.0, 2.0]), unit(), levels=3, b_0=0.3))
        assert r.snap == pytest.approx(0.2)

    def test_horizon_guard(self, pw1):
        with pytest.raises(ConfigError):
            OracleInstance(np.ones(24 * 8), pw1)

    def test_levels_guard(self, pw1):
        with pytest.raises(ConfigError):
            OracleInstance(np.ones(2), pw1, levels=1)

    def test_refinement_nondecreasing(self, c3, pw1):
        prices = np.array([c3.price(c3.period_of_hour(h)) for h in range(24)])
        profits = [dp_optimal_profit(OracleInstance(prices, pw1, levels=n)).profit for n in (11, 21, 41, 81)]
        assert all(a <= b + 1e-9 for a, b in zip(profits, profits[1:]))

    def test_dominates_random_schedules(self, c2, pw1):
        prices = np.array([c2.price(c2.period_of_hour(h)) for h in range(24)])
        best = dp_optimal_profit(OracleInstance(prices, pw1)).profit
        xs = random_feasible_schedules(pw1, 24, 500, rng=3)
        assert max(schedule_profit(x, prices, pw1) for x in xs) <= best + 1e-9


class TestThreshold:
    def test_case1_c3(self, c3, pw1):
        rep = verify_threshold_optimality(c3, pw1)
        assert rep.regime is Regime.CASE1 and rep.passed

    def test_case4_c2(self, c2):
        slow = BatterySpec.from_soc(10, 0.1, 0.9, delta_min=-0.5, delta_max=0.4, eta_ch=0.95, eta_dis=0.95)
        rep = verify_threshold_optimality(c2, slow, days=2)
        assert rep.regime is Regime.CASE4 and rep.passed

    def test_null_battery(self, c3):
        rep = verify_threshold_optimality(c3, BatterySpec.null())
        assert rep.gap == 0.0

    def test_three_level_slow_battery_is_not_optimal(self, c3):
        # Charging in mid-peak pays off when the off-peak window is too short;
        # the idle mid-peak rule leaves that on the table.
        prob = random_tou_problem(11, 3)
        rep = verify_threshold_optimality(c3.with_options(prices=c3.prices), prob.spec, days=1)
        assert rep.regime in (Regime.CASE3, Regime.CASE4)
        assert not rep.passed

    @pytest.mark.parametrize("regime", [1, 2, 3, 4])
    def test_random_problem_regime(self, regime):
        prob = random_tou_problem(100 + regime, regime)
        rep = verify_threshold_optimality(prob.contract, prob.spec, prob.days)
        assert rep.regime.value == regime and rep.passed

    def test_three_level_only_case1(self):
        with pytest.raises(ConfigError):
            random_tou_problem(1, 2, three_level=True)


class TestIndependence:
    def test_single_step(self, pw1):
        inst = OracleInstance(np.array([2.0]), pw1)
        assert verify_load_independence(inst, [np.array([3.0]), np.array([-1.0])])

    def test_nem_holds(self, c2, pw1):
        assert load_independence_check(c2, pw1, count=5, seed=1).passed

    def test_half_sell_breaks(self, c3, pw1):
        chk = load_independence_check(c3, pw1, count=10, seed=1, sell_ratio=0.5)
        assert chk.expected_break and not chk.passed


def test_single_price_zero_profit(pw1):
    chk = single_price_check(pw1, count=2000, seed=5)
    assert chk.passed


def test_suite_null_battery_passes():
    results = run_verification(seed=2, count=5, spec=BatterySpec.null())
    assert all(r.passed for r in results if not r.expected_break)
