"""Battery dispatch and electricity billing for prosumers under block and time-of-use tariffs."""

from .battery import BatterySpec
from .config import load_battery, load_tariff
from .controller import Regime
from .econ import arbitrage_gain_per_day, arbitrage_profitable, cycle_economics, recommend_contract
from .errors import (
    ConfigError,
    ConstraintError,
    DataError,
    DomainError,
    InvariantError,
    PolicyError,
    StorageSimError,
    VerificationError,
)
from .oracle import OracleInstance, dp_optimal_profit, verify_threshold_optimality
from .profile import LoadProfile, read_profile_csv, synthetic_profile
from .simulator import SimulationConfig, SimulationResult, run_month
from .tariff import ContractKind, EnergyAggregates, MonthlyBill, TariffContract, compute_kfac, total_bill

__version__ = "0.1.0"
