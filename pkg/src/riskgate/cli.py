"""Command-line entry point: ``riskgate {main,stale,regime,sensitivity,emit-profile}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import experiments as ex
from .comparators import MAIN_SYSTEMS, parse_systems
from .contract import ConfigError, ThresholdConfig, load_thresholds
from .scenario.config import ScenarioConfig, load_scenario

log = logging.getLogger("riskgate")


def parse_seeds(text: str) -> list[int]:
    """``42..51`` (inclusive), ``7`` or ``1,3,5``."""
    text = text.strip()
    if ".." in text:
        a, b = text.split("..", 1)
        lo, hi = int(a), int(b)
        if hi < lo:
            raise argparse.ArgumentTypeError(f"empty seed range {text!r}")
        return list(range(lo, hi + 1))
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from exc


def _ucs(arg: str | None) -> list[str]:
    return [arg] if arg else ["uc1", "uc2"]


def _configs(args: argparse.Namespace, uc: str) -> tuple[ScenarioConfig, ThresholdConfig | None]:
    """``--config`` may name a threshold file or a scenario file; the shape of
    the JSON decides which."""
    scenario = load_scenario(uc)
    thresholds = None
    if args.config:
        path = Path(args.config)
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        if "tau_commit" in raw:
            thresholds = load_thresholds(path)
        else:
            scenario = ScenarioConfig.from_dict(raw)
            if scenario.uc != uc:
                raise ConfigError(f"scenario file is for {scenario.uc}, not {uc}")
    return scenario, thresholds


def cmd_main(args: argparse.Namespace) -> int:
    out = Path(args.out)
    systems = parse_systems(args.systems) if args.systems else list(MAIN_SYSTEMS)
    for uc in _ucs(args.uc):
        scenario, thresholds = _configs(args, uc)
        seeds = args.seeds or list(ex.DEFAULT_SEEDS)
        epochs = args.epochs or 1000
        log.info("main %s: %d systems x %d seeds x %d epochs", uc, len(systems), len(seeds), epochs)
        res = ex.main_experiment(uc, seeds, epochs, systems, scenario, thresholds, args.jobs, args.audit_dir)
        ex.write_table(out / f"main_{uc}_metrics.csv", res["metrics"], ex.METRIC_COLUMNS)
        ex.write_table(out / f"main_{uc}_kpis.csv", res["kpis"], ex.kpi_columns(res["kpis"]))
        ex.write_json(out / f"main_{uc}_stats.json", res["stats"])
        fb = res["stats"].get("ours_vs_fb_inv")
        if fb is not None and not (fb["decision_identity"] and fb["kpi_identity"]):
            log.error("OURS and FB_INV diverged on %s", uc)
            return 3
    return 0


def cmd_stale(args: argparse.Namespace) -> int:
    out = Path(args.out)
    for uc in _ucs(args.uc):
        scenario, thresholds = _configs(args, uc)
        rows = ex.stale_experiment(uc, args.seeds or list(ex.DEFAULT_SEEDS), args.epochs or 500, scenario, thresholds)
        ex.write_table(out / f"stale_{uc}.csv", rows, ex.STALE_COLUMNS)
    return 0


def cmd_regime(args: argparse.Namespace) -> int:
    out = Path(args.out)
    for uc in _ucs(args.uc):
        scenario, thresholds = _configs(args, uc)
        rows = ex.regime_experiment(
            uc, args.mode, args.seeds, args.epochs, args.slice, scenario, thresholds, args.jobs
        )
        ex.write_table(out / f"regime_{args.mode}_{uc}.csv", rows, ex.REGIME_COLUMNS)
    return 0


def cmd_sensitivity(args: argparse.Namespace) -> int:
    uc = args.uc or "uc1"
    scenario, thresholds = _configs(args, uc)
    rows = ex.sensitivity_experiment(
        uc, ex.TAU_GRID, args.seeds or list(ex.DEFAULT_SEEDS), args.epochs or 1000, scenario, thresholds, args.jobs
    )
    ex.write_table(Path(args.out) / f"sensitivity_{uc}.csv", rows, ex.SENSITIVITY_COLUMNS)
    return 0


def cmd_emit_profile(args: argparse.Namespace) -> int:
    text = ex.profile_text()
    if args.out == "-":
        sys.stdout.write(text)
    else:
        path = Path(args.out) / "profile.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="riskgate", description="Risk-gated intent executor benchmark harness.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp: argparse.ArgumentParser, default_out: str = "results") -> None:
        sp.add_argument("--uc", choices=("uc1", "uc2"), help="use case (default: both)")
        sp.add_argument("--seeds", type=parse_seeds, help="seed range a..b (default 42..51)")
        sp.add_argument("--epochs", type=int, help="epochs per run")
        sp.add_argument("--out", default=default_out, help="output directory")
        sp.add_argument("--config", help="threshold or scenario JSON overriding the preset")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes")

    sp = sub.add_parser("main", help="five-system comparison with pairwise statistics")
    common(sp)
    sp.add_argument("--systems", help="comma-separated system list")
    sp.add_argument("--audit-dir", help="write per-run audit JSONL here")
    sp.set_defaults(func=cmd_main)

    sp = sub.add_parser("stale", help="stale-state injection campaign")
    common(sp)
    sp.set_defaults(func=cmd_stale)

    sp = sub.add_parser("regime", help="regime grid with delta-of-deltas verdicts")
    common(sp)
    sp.add_argument("--mode", choices=("coarse", "dense"), default="dense")
    sp.add_argument("--slice", help="run only this slice (plus the benign reference)")
    sp.set_defaults(func=cmd_regime)

    sp = sub.add_parser("sensitivity", help="commit-threshold sweep")
    common(sp)
    sp.set_defaults(func=cmd_sensitivity)

    sp = sub.add_parser("emit-profile", help="write the static profile descriptor")
    sp.add_argument("--out", default="-", help="directory, or - for stdout")
    sp.set_defaults(func=cmd_emit_profile)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
