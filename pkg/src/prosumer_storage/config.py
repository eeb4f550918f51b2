"""YAML loaders for tariff contracts and battery presets.

Tariff schema (one file per contract)::

    name: str
    kind: C1 | C2 | C3
    prices: {peak: float, mid-peak: float, off-peak: float}   # peso/kWh, ToU only
    pricing: block | flat                                     # C1 only
    blocks: [{upto: float | null, price: float}, ...]         # C1 only
    flat_rate: float                                          # C1 only
    schedule: [{start: int, end: int, period: str}, ...]      # hours, [start, end)
    period_durations: {peak: float, off-peak: float}          # optional, hours
    power_charge_rate: float                                  # peso/kW
    fixed_monthly_charge: float                               # peso
    surcharge_coefficient: float                              # C2/C3, percent
    supply_voltage_kv: float                                  # C3, used if no coefficient
    reactive_base: peak | total                               # C3 only
    contracted_power: float                                   # kW
    nem: bool

Battery schema::

    name, b_rated, soc_min, soc_max, delta_min, delta_max, eta_ch, eta_dis,
    s_b_max, purchase_cost, rated_cycles, calendar_life_years
"""

from __future__ import annotations

import math
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from .battery import BatterySpec
from .errors import ConfigError
from .tariff import PERIODS, ContractKind, TariffContract, coefficient_for_voltage

BUNDLED_TARIFFS = ("c1", "c2", "c3")
BUNDLED_BATTERIES = ("powerwall1", "powerwall2")


def _load_yaml(path: Path) -> dict[str, Any]:
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{path}:{mark.line + 1}" if mark else str(path)
        raise ConfigError(f"{where}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    return data


def _schedule(entries, source) -> tuple[str, ...]:
    hours: list[str | None] = [None] * 24
    for entry in entries:
        try:
            start, end, period = int(entry["start"]), int(entry["end"]), str(entry["period"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{source}: bad schedule entry {entry!r}") from exc
        if period not in PERIODS:
            raise ConfigError(f"{source}: unknown period {period!r}")
        if not 0 <= start < end <= 24:
            raise ConfigError(f"{source}: schedule range {start}-{end} outside the day")
        for hr in range(start, end):
            if hours[hr] is not None:
                raise ConfigError(f"{source}: hour {hr} scheduled twice")
            hours[hr] = period
    gaps = [hr for hr, p in enumerate(hours) if p is None]
    if gaps:
        raise ConfigError(f"{source}: hours {gaps} have no period")
    return tuple(hours)  # type: ignore[arg-type]


def tariff_from_dict(data: dict[str, Any], source: str = "<dict>", flat_c1: bool | None = None) -> TariffContract:
    try:
        kind = ContractKind(str(data["kind"]))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{source}: missing or unknown 'kind'") from exc
    prices = {str(k): float(v) for k, v in (data.get("prices") or {}).items()}
    blocks = []
    flat_mode = False
    if kind is ContractKind.C1:
        for b in data.get("blocks") or []:
            upto = math.inf if b.get("upto") is None else float(b["upto"])
            blocks.append((upto, float(b["price"])))
        flat_mode = str(data.get("pricing", "block")) == "flat"
        if flat_c1 is not None:
            flat_mode = flat_c1
        if data.get("flat_rate") is not None:
            prices["off-peak"] = float(data["flat_rate"])
    coefficient = data.get("surcharge_coefficient")
    if coefficient is None and kind is not ContractKind.C1 and "supply_voltage_kv" in data:
        coefficient = coefficient_for_voltage(float(data["supply_voltage_kv"]))
    try:
        return TariffContract(
            kind=kind,
            name=str(data.get("name", kind.value)),
            prices=prices,
            period_schedule=_schedule(data.get("schedule") or [{"start": 0, "end": 24, "period": "off-peak"}], source),
            blocks=tuple(blocks),
            flat_rate_mode=flat_mode,
            power_charge_rate=float(data.get("power_charge_rate", 0.0)),
            fixed_monthly_charge=float(data.get("fixed_monthly_charge", 0.0)),
            surcharge_coefficient=None if coefficient is None else float(coefficient),
            contracted_power=float(data.get("contracted_power", 3.7)),
            nem_enabled=bool(data.get("nem", False)),
            period_durations={str(k): float(v) for k, v in (data.get("period_durations") or {}).items()},
            reactive_base=str(data.get("reactive_base", "peak")),
        )
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def battery_from_dict(data: dict[str, Any], source: str = "<dict>") -> BatterySpec:
    try:
        return BatterySpec.from_soc(
            float(data["b_rated"]),
            float(data.get("soc_min", 0.0)),
            float(data.get("soc_max", 1.0)),
            delta_min=float(data["delta_min"]),
            delta_max=float(data["delta_max"]),
            eta_ch=float(data.get("eta_ch", 1.0)),
            eta_dis=float(data.get("eta_dis", 1.0)),
            s_b_max=float(data.get("s_b_max", math.inf)),
            purchase_cost=float(data.get("purchase_cost", 0.0)),
            rated_cycles=float(data.get("rated_cycles", 0.0)),
            calendar_life_years=float(data.get("calendar_life_years", 10.0)),
            name=str(data.get("name", "")),
        )
    except KeyError as exc:
        raise ConfigError(f"{source}: missing field {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def _resolve(name_or_path: str | Path, bundled: tuple[str, ...]) -> tuple[Path | None, str]:
    text = str(name_or_path)
    if text.lower() in bundled:
        return None, text.lower()
    return Path(text), text


def load_tariff(name_or_path: str | Path, flat_c1: bool | None = None) -> TariffContract:
    """Load a tariff from a YAML file or a bundled name (``c1``, ``c2``, ``c3``)."""
    path, key = _resolve(name_or_path, BUNDLED_TARIFFS)
    if path is None:
        text = resources.files(__package__).joinpath(f"data/tariffs/{key}.yaml").read_text()
        return tariff_from_dict(yaml.safe_load(text), key, flat_c1)
    return tariff_from_dict(_load_yaml(path), str(path), flat_c1)


def load_battery(name_or_path: str | Path) -> BatterySpec:
    """Load a battery from a YAML file or a bundled preset name.

    ``none`` gives the zero-capacity battery.
    """
    if str(name_or_path).lower() == "none":
        return BatterySpec.null()
    path, key = _resolve(name_or_path, BUNDLED_BATTERIES)
    if path is None:
        text = resources.files(__package__).joinpath(f"data/batteries/{key}.yaml").read_text()
        return battery_from_dict(yaml.safe_load(text), key)
    return battery_from_dict(_load_yaml(path), str(path))
