"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 data or invariant error,
4 verification failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from . import econ, oracle, report
from .battery import BatterySpec
from .config import load_battery, load_tariff
from .errors import ConfigError, DataError, StorageSimError
from .profile import read_profile_csv, synthetic_profile, write_schedule_csv
from .simulator import SimulationConfig, run_month

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_VERIFY = 0, 2, 3, 4


def _slug(arg: str) -> str:
    return Path(arg).stem.lower().replace(" ", "_")


def _tariffs(args, default):
    names = args.tariff or list(default)
    return [(_slug(n), load_tariff(n, flat_c1=True if args.flat_c1 else None)) for n in names]


def _batteries(args, default):
    names = args.battery if args.battery is not None else list(default)
    return [(_slug(n), load_battery(n)) for n in names]


def _profile(args):
    if args.profile:
        return read_profile_csv(args.profile)
    return synthetic_profile(args.days, args.reactive_share)


def _out(args) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"{out}: cannot create output directory ({exc.strerror})") from exc
    return out


def _config(args, profile) -> SimulationConfig:
    days = max(int(round(len(profile) * profile.h / 24)), 1)
    return SimulationConfig(h=profile.h, n_month=len(profile), days_in_month=days, legacy_clipping=args.legacy_clipping)


def cmd_simulate(args) -> int:
    out = _out(args)
    profile = _profile(args)
    cfg = _config(args, profile)
    tariffs = _tariffs(args, ["c3"])
    batteries = _batteries(args, ["powerwall1"]) or [("none", BatterySpec.null())]
    summary = []
    for tkey, contract in tariffs:
        for bkey, spec in batteries:
            res = run_month(profile, contract, spec, cfg)
            stem = f"{tkey}_{bkey}"
            s = res.schedule
            write_schedule_csv(s.timestamps, s.x, s.p_b, s.q_b, s.b, out / f"schedule_{stem}.csv")
            rep = report.bill_report(res, contract, spec)
            report.write_json(rep, out / f"bill_{stem}.json")
            print(f"== {rep['contract']} with {rep['battery']} ==")
            print(report.bill_table(rep))
            print(f"savings {res.savings_pct:.2f}%\n")
            summary.append({"contract": tkey, "battery": bkey, "nominal": res.nominal_bill.c_total,
                            "with_storage": res.storage_bill.c_total, "profit": res.profit,
                            "savings_pct": res.savings_pct})
    report.write_csv(summary, out / "summary.csv")
    if not args.no_sweep:
        specs = [spec for _, spec in batteries if spec.window > 0]
        points = report.reactive_sweep(
            [c for _, c in tariffs], specs, days=args.days, legacy_clipping=args.legacy_clipping, workers=args.workers
        )
        files = report.write_sweep(points, out / "figures", plots=not args.no_plots)
        print(f"wrote {len(files)} sweep files to {out / 'figures'}")
    print(report.format_table(summary))
    return EXIT_OK


def cmd_recommend(args) -> int:
    out = _out(args)
    profile = _profile(args)
    cfg = _config(args, profile)
    tariffs = _tariffs(args, ["c1", "c2", "c3"])
    batteries = _batteries(args, [])
    ranked = econ.recommend_contract(profile, [b for _, b in batteries], [c for _, c in tariffs], cfg, args.workers)
    rows = [
        {"rank": i + 1, "option": r.label, "total_cost": r.total_cost, "profit": r.profit,
         "stress": r.stress, "error": r.error}
        for i, r in enumerate(ranked)
    ]
    report.write_csv(rows, out / "recommend.csv")
    report.write_json(rows, out / "recommend.json")
    print(report.format_table(rows))
    return EXIT_OK if all(r.error is None for r in ranked) else EXIT_DATA


def cmd_potential(args) -> int:
    out = _out(args)
    tariffs = [(k, c) for k, c in _tariffs(args, ["c2", "c3"]) if c.kind.is_tou]
    if not tariffs:
        raise ConfigError("potential needs at least one time-of-use tariff")
    batteries = _batteries(args, ["powerwall1", "powerwall2"])
    template = batteries[0][1] if batteries else load_battery("powerwall1")
    table = econ.potential_table(args.sizes, [c for _, c in tariffs], template, args.days)
    report.write_csv(table, out / "potential.csv")
    print(report.format_table(table, digits=2))

    rows = []
    for bkey, spec in batteries:
        for tkey, contract in tariffs:
            gain = args.days * econ.contract_gain_per_day(spec, contract)
            r = econ.cycle_economics(spec, gain, args.fx, args.days, args.cycles_override)
            rows.append({"battery": bkey, "contract": tkey, **r.as_dict()})
    if rows:
        report.write_csv(rows, out / "economics.csv")
        report.write_json({"potential": table, "economics": rows}, out / "potential.json")
        print()
        cols = ["battery", "contract", "monthly_gain", "monthly_gain_usd", "gain_per_cycle", "required_per_cycle",
                "profitable", "payback"]
        print(report.format_table(rows, cols))
    return EXIT_OK


def cmd_verify(args) -> int:
    spec = load_battery(args.battery[0]) if args.battery else None
    results = oracle.run_verification(args.seed, args.count, spec)
    failed = False
    for r in results:
        if r.expected_break:
            status = "BROKEN (expected)" if not r.passed else "not broken"
        else:
            status = "PASS" if r.passed else "FAIL"
            failed |= not r.passed
        print(f"{status:18s} {r.name}: {r.detail} [seed {r.seed}]")
    report.write_json([asdict(r) for r in results], _out(args) / "verify.json")
    return EXIT_VERIFY if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tariff", action="append", help="tariff YAML or bundled name (c1, c2, c3); repeatable")
    common.add_argument("--battery", action="append",
                        help="battery YAML or bundled name (powerwall1, powerwall2); repeatable")
    common.add_argument("--profile", help="load profile CSV; a synthetic month is used if omitted")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--days", type=int, default=30)
    common.add_argument("--fx", type=float, default=econ.DEFAULT_FX, help="USD per peso")
    common.add_argument("--cycles-override", type=float, default=None, help="cycles per month")
    common.add_argument("--flat-c1", action="store_true", help="bill C1 at a single flat rate")
    common.add_argument("--legacy-clipping", "--paper-compat", dest="legacy_clipping", action="store_true",
                        help="keep the stored delta unclipped when the converter saturates")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--reactive-share", type=float, default=0.0,
                        help="reactive/active energy of the synthetic profile")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="prosumer-storage", description="Storage dispatch and billing under ToU tariffs.")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("simulate", parents=[common], help="simulate a month and write bills and figure data")
    s.add_argument("--no-sweep", action="store_true", help="skip the reactive-share sweep")
    s.add_argument("--no-plots", action="store_true", help="write sweep CSVs without PNGs")
    s.set_defaults(func=cmd_simulate)
    r = sub.add_parser("recommend", parents=[common], help="rank contract and battery options")
    r.set_defaults(func=cmd_recommend)
    pot = sub.add_parser("potential", parents=[common], help="monthly arbitrage potential and cycle economics")
    pot.add_argument("--sizes", type=float, nargs="+", default=[1, 2, 5, 10, 20], help="battery sizes, kWh")
    pot.set_defaults(func=cmd_potential)
    v = sub.add_parser("verify", parents=[common], help="run the oracle verification suite")
    v.add_argument("--count", type=int, default=60, help="randomized optimality instances")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except StorageSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
