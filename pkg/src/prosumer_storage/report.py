"""Reactive-share sweeps, figure data and bill reports.

A sweep holds the load's active energy fixed and scales its reactive energy
from nothing up to the active total.  Each point is billed three ways under
each contract: with no storage, with storage doing arbitrage only, and with
storage doing arbitrage plus reactive compensation.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .battery import BatterySpec
from .errors import StorageSimError
from .profile import NOMINAL_PERIOD_ENERGY, synthetic_profile
from .simulator import SimulationConfig, SimulationResult, run_batch
from .tariff import TariffContract

NOMINAL = "nominal"
ARBITRAGE = "arbitrage"
FULL = "arbitrage+reactive"
SCENARIOS = (NOMINAL, ARBITRAGE, FULL)

DEFAULT_SHARES = tuple(np.round(np.linspace(0.0, 1.0, 11), 10))

SWEEP_COLUMNS = (
    "contract",
    "battery",
    "scenario",
    "reactive_share",
    "c_active",
    "c_reactive",
    "c_variable",
    "c_total",
    "reactive_to_active_pct",
    "savings_pct",
)


@dataclass(frozen=True)
class SweepPoint:
    contract: str
    battery: str
    scenario: str
    reactive_share: float
    c_active: float
    c_reactive: float
    c_variable: float
    c_total: float
    reactive_to_active_pct: float
    savings_pct: float


def _label(contract: TariffContract) -> str:
    return contract.name or contract.kind.value


def _point(contract, battery, scenario, share, bill, nominal_total) -> SweepPoint:
    ratio = 100.0 * bill.c_reactive / bill.c_active if bill.c_active else float("nan")
    savings = 100.0 * (nominal_total - bill.c_total) / nominal_total
    return SweepPoint(
        _label(contract), battery, scenario, float(share), bill.c_active, bill.c_reactive,
        bill.c_variable, bill.c_total, ratio, savings,
    )


def reactive_sweep(
    contracts: Sequence[TariffContract],
    specs: Sequence[BatterySpec],
    shares: Sequence[float] = DEFAULT_SHARES,
    days: int = 30,
    q1_factor: float = 1.2,
    period_energy: Mapping[str, float] = NOMINAL_PERIOD_ENERGY,
    legacy_clipping: bool = False,
    workers: int = 1,
) -> list[SweepPoint]:
    """Bill the synthetic load across ``shares`` of reactive to active energy.

    Raises
    ------
    StorageSimError
        If any simulation cell fails; the message names the cell.
    """
    full_cfg = SimulationConfig.for_days(days, legacy_clipping=legacy_clipping)
    arb_cfg = SimulationConfig.for_days(days, legacy_clipping=legacy_clipping, reactive_compensation=False)
    tasks = []
    for si, share in enumerate(shares):
        profile = synthetic_profile(days, share, q1_factor, period_energy)
        for ci, contract in enumerate(contracts):
            tasks.append(((si, ci, -1, NOMINAL), profile, contract, BatterySpec.null(), full_cfg))
            for bi, spec in enumerate(specs):
                tasks.append(((si, ci, bi, ARBITRAGE), profile, contract, spec, arb_cfg))
                tasks.append(((si, ci, bi, FULL), profile, contract, spec, full_cfg))
    cells = run_batch(tasks, workers)
    failed = [c for c in cells if c.result is None]
    if failed:
        raise StorageSimError(f"sweep cell {failed[0].key} failed: {failed[0].error}")

    results: dict[tuple, SimulationResult] = {c.key: c.result for c in cells}
    points = []
    for si, share in enumerate(shares):
        for ci, contract in enumerate(contracts):
            nominal = results[(si, ci, -1, NOMINAL)].nominal_bill
            points.append(_point(contract, "none", NOMINAL, share, nominal, nominal.c_total))
            for bi, spec in enumerate(specs):
                name = spec.name or f"battery{bi}"
                for scenario in (ARBITRAGE, FULL):
                    bill = results[(si, ci, bi, scenario)].storage_bill
                    points.append(_point(contract, name, scenario, share, bill, nominal.c_total))
    return points


# -- figure data ----------------------------------------------------------------


@dataclass(frozen=True)
class FigureData:
    key: str
    title: str
    ylabel: str
    series: dict  # label -> (shares, values)
    xlabel: str = "reactive / active energy"

    def wide_rows(self) -> list[dict]:
        labels = list(self.series)
        xs = self.series[labels[0]][0] if labels else []
        return [{"reactive_share": x, **{lab: self.series[lab][1][i] for lab in labels}} for i, x in enumerate(xs)]


def _series(points, battery, scenario, field) -> dict:
    out: dict[str, tuple[list, list]] = {}
    for p in points:
        if p.battery == battery and p.scenario == scenario:
            xs, ys = out.setdefault(p.contract, ([], []))
            xs.append(p.reactive_share)
            ys.append(getattr(p, field))
    return out


def figure_data(points: Sequence[SweepPoint]) -> list[FigureData]:
    """Series for each cost view, one line per contract."""
    figs = [
        FigureData("nominal_active_cost", "Active energy cost", "peso", _series(points, "none", NOMINAL, "c_active")),
        FigureData("nominal_reactive_cost", "Reactive energy cost", "peso", _series(points, "none", NOMINAL, "c_reactive")),
        FigureData("nominal_variable_cost", "Variable cost", "peso", _series(points, "none", NOMINAL, "c_variable")),
        FigureData("nominal_total_cost", "Total cost", "peso", _series(points, "none", NOMINAL, "c_total")),
        FigureData(
            "reactive_to_active_pct", "Reactive cost as share of active cost", "%",
            _series(points, "none", NOMINAL, "reactive_to_active_pct"),
        ),
    ]
    batteries = sorted({p.battery for p in points if p.battery != "none"})
    for b in batteries:
        figs += [
            FigureData(f"{b}_arbitrage_active_cost", f"Active energy cost, {b} arbitrage", "peso",
                       _series(points, b, ARBITRAGE, "c_active")),
            FigureData(f"{b}_arbitrage_total_cost", f"Total cost, {b} arbitrage only", "peso",
                       _series(points, b, ARBITRAGE, "c_total")),
            FigureData(f"{b}_total_cost", f"Total cost, {b} arbitrage and compensation", "peso",
                       _series(points, b, FULL, "c_total")),
            FigureData(f"{b}_savings_pct", f"Savings with {b}", "%", _series(points, b, FULL, "savings_pct")),
        ]
    return figs


def write_csv(rows: Sequence[Mapping], path: str | Path, columns: Sequence[str] | None = None) -> Path:
    path = Path(path)
    columns = list(columns or (rows[0].keys() if rows else []))
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns)
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return path


def write_sweep(points: Sequence[SweepPoint], out_dir: str | Path, plots: bool = True) -> list[Path]:
    """Write the tidy sweep table, one wide CSV per figure and, optionally, PNGs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [write_csv([asdict(p) for p in points], out / "sweep.csv", SWEEP_COLUMNS)]
    for fig in figure_data(points):
        if not fig.series:
            continue
        written.append(write_csv(fig.wide_rows(), out / f"{fig.key}.csv"))
        if plots:
            from .plotting import line_figure

            png = out / f"{fig.key}.png"
            line_figure(fig.series, fig.xlabel, fig.ylabel, fig.title, png)
            written.append(png)
    return written


# -- bill reports -----------------------------------------------------------------


def bill_report(result: SimulationResult, contract: TariffContract, spec: BatterySpec) -> dict:
    return {
        "contract": _label(contract),
        "battery": spec.name or "battery",
        "regime": result.regime.name if result.regime is not None else None,
        "nominal": {"bill": result.nominal_bill.as_dict(), "energy": result.nominal_aggregates.as_dict()},
        "storage": {"bill": result.storage_bill.as_dict(), "energy": result.storage_aggregates.as_dict()},
        "profit": result.profit,
        "arbitrage_profit": result.arbitrage_profit,
        "reactive_profit": result.reactive_profit,
        "savings_pct": result.savings_pct,
        "stress": result.stress,
    }


def write_json(data, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(data, indent=2, default=float) + "\n")
    return path


def format_table(rows: Sequence[Mapping], columns: Sequence[str] | None = None, digits: int = 3) -> str:
    """Right-aligned plain-text table."""
    if not rows:
        return ""
    columns = list(columns or rows[0].keys())

    def cell(v) -> str:
        if isinstance(v, float):
            return f"{v:.{digits}f}"
        return "" if v is None else str(v)

    body = [[cell(r.get(c)) for c in columns] for r in rows]
    widths = [max(len(c), *(len(b[i]) for b in body)) for i, c in enumerate(columns)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(columns, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(v.rjust(w) for v, w in zip(b, widths)) for b in body]
    return "\n".join(lines)


def bill_table(report: Mapping) -> str:
    """Nominal against storage bill, one row per cost component."""
    nominal, storage = report["nominal"]["bill"], report["storage"]["bill"]
    rows = [
        {"component": k, "nominal": nominal[k], "with storage": storage[k], "saving": nominal[k] - storage[k]}
        for k in nominal
        if k != "kfac"
    ]
    rows.append({"component": "kfac", "nominal": nominal["kfac"], "with storage": storage["kfac"], "saving": None})
    return format_table(rows, digits=4)
