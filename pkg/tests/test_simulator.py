import math
from datetime import datetime

import numpy as np
import pytest

from prosumer_storage.battery import BatterySpec
from prosumer_storage.controller import Regime
from prosumer_storage.errors import ConfigError, DataError
from prosumer_storage.profile import LoadProfile, regular_timestamps, synthetic_profile
from prosumer_storage.simulator import (
    SimulationConfig,
    aggregate,
    aggregate_profile,
    bill_with_battery,
    run_batch,
    run_month,
)
from prosumer_storage.tariff import active_energy_cost


def flat_profile(days=1, p=1.0, q=0.0):
    n = 24 * days
    return LoadProfile(regular_timestamps(datetime(2019, 1, 1), n, 1.0), np.full(n, p), np.zeros(n), np.full(n, q), 1.0)


class TestAggregation:
    def test_c3_day(self, c3):
        agg = aggregate_profile(flat_profile(), c3)
        assert (agg.ea_peak, agg.ea_midpeak, agg.ea_offpeak) == (6.0, 11.0, 7.0)

    def test_zero(self, c3):
        agg = aggregate_profile(flat_profile(p=0.0), c3)
        assert agg.ea == 0 and agg.er == 0 and agg.er_q1 == 0

    def test_alternating_reactive(self, c2):
        q = np.where(np.arange(24) % 2 == 0, 1.0, -1.0)
        agg = aggregate(np.ones(24), q, ["off-peak"] * 24, 1.0)
        assert agg.er == 0.0 and agg.er_q1 == 24.0

    def test_export_floored_without_nem(self):
        agg = aggregate([1.0, -3.0], [0, 0], ["off-peak"] * 2, 1.0, nem=False)
        assert agg.ea_offpeak == 1.0

    def test_unknown_label(self):
        with pytest.raises(ConfigError):
            aggregate([1.0], [0.0], ["shoulder"], 1.0)


class TestRunMonth:
    def test_null_battery(self, c3):
        prof = synthetic_profile(30, 0.5)
        res = run_month(prof, c3, BatterySpec.null())
        assert res.profit == 0.0
        assert res.storage_bill == res.nominal_bill

    def test_pw1_c2_arbitrage(self, c2, pw1):
        res = run_month(synthetic_profile(30), c2, pw1)
        assert res.regime is Regime.CASE1
        assert res.arbitrage_profit == pytest.approx(682.47, rel=5e-3)

    def test_pw2_c3_arbitrage(self, c3, pw2):
        res = run_month(synthetic_profile(30), c3, pw2)
        assert res.arbitrage_profit == pytest.approx(1988.3, rel=5e-3)

    def test_energy_closure_and_length(self, c3, pw1):
        res = run_month(synthetic_profile(30, 0.6), c3, pw1)
        s = res.schedule
        assert len(s) == 720
        assert math.fsum(s.x) == pytest.approx(s.b[-1] - s.b_0, rel=1e-9, abs=1e-9)

    def test_profit_identity(self, c3, pw1):
        res = run_month(synthetic_profile(30, 0.6), c3, pw1)
        assert res.profit == res.nominal_bill.c_total - res.storage_bill.c_total

    def test_deterministic(self, c2, pw1):
        a = run_month(synthetic_profile(30, 0.4), c2, pw1)
        b = run_month(synthetic_profile(30, 0.4), c2, pw1)
        assert np.array_equal(a.schedule.x, b.schedule.x)
        assert a.storage_bill == b.storage_bill

    def test_c1_nem_no_active_dispatch(self, c1, pw1):
        res = run_month(synthetic_profile(30, 0.9), c1.with_options(nem_enabled=True), pw1)
        assert np.all(res.schedule.x == 0)
        assert res.profit > 0  # reactive compensation only

    def test_c1_self_consumption_stores_surplus(self, c1, pw1):
        n = 24
        gen = np.where((np.arange(n) >= 10) & (np.arange(n) < 14), 3.0, 0.0)
        prof = LoadProfile(regular_timestamps(datetime(2019, 1, 1), n, 1.0), np.full(n, 1.0), gen, np.zeros(n), 1.0)
        res = run_month(prof, c1, pw1)
        assert res.schedule.x.max() > 0
        assert res.profit > 0

    def test_converter_clip_recomputes_delta(self, c3):
        spec = BatterySpec.from_soc(20.0, 0.0, 1.0, delta_min=-10, delta_max=10, eta_ch=0.9, eta_dis=0.9, s_b_max=1.0)
        res = run_month(synthetic_profile(1), c3, spec, SimulationConfig.for_days(1))
        assert np.max(np.abs(res.schedule.p_b)) <= 1.0 + 1e-12
        assert res.schedule.x.max() == pytest.approx(0.9)
        compat = run_month(synthetic_profile(1), c3, spec, SimulationConfig.for_days(1, legacy_clipping=True))
        assert compat.schedule.x.max() > 0.9

    def test_larger_converter_never_hurts(self, c3):
        prof = synthetic_profile(30, 0.8)
        profits = []
        for s_max in (0.5, 1.0, 2.0, 5.0, 10.0):
            spec = BatterySpec.from_soc(6.4, 0.2, 0.98, delta_min=-3.3, delta_max=3.3, eta_ch=0.95, eta_dis=0.95,
                                        s_b_max=s_max)
            profits.append(run_month(prof, c3, spec).profit)
        assert all(a <= b + 1e-9 for a, b in zip(profits, profits[1:]))

    def test_length_mismatch(self, c3, pw1):
        with pytest.raises(DataError):
            run_month(synthetic_profile(1), c3, pw1, SimulationConfig.for_days(2))

    def test_bad_initial_charge(self, c3, pw1):
        with pytest.raises(ConfigError):
            run_month(synthetic_profile(1), c3, pw1, SimulationConfig.for_days(1, b_0=100.0))

    def test_config_cover_check(self):
        with pytest.raises(ConfigError):
            SimulationConfig(h=1.0, n_month=100, days_in_month=30)

    def test_rebill_matches(self, c3, pw1):
        prof = synthetic_profile(30, 0.6)
        res = run_month(prof, c3, pw1)
        _, bill = bill_with_battery(prof, c3, res.schedule.p_b, res.schedule.q_b)
        assert bill == res.storage_bill

    def test_nem_decomposition(self, c3, pw1):
        prof = synthetic_profile(30)
        res = run_month(prof, c3, pw1)
        battery_only = LoadProfile(prof.timestamps, np.zeros(len(prof)), np.zeros(len(prof)), np.zeros(len(prof)), 1.0)
        _, b_only = bill_with_battery(battery_only, c3, res.schedule.p_b, np.zeros(len(prof)))
        assert res.storage_bill.c_active == pytest.approx(res.nominal_bill.c_active + b_only.c_active, rel=1e-12)


def test_batch_order_and_errors(c3, pw1):
    good = synthetic_profile(1)
    tasks = [("a", good, c3, pw1, None), ("b", good, c3, pw1, SimulationConfig.for_days(2)), ("c", good, c3, pw1, None)]
    for workers in (1, 2):
        cells = run_batch(tasks, workers)
        assert [c.key for c in cells] == ["a", "b", "c"]
        assert cells[1].result is None and "DataError" in cells[1].error
        assert cells[0].result.profit == cells[2].result.profit
