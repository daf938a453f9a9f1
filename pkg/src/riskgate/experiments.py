"""Experiment families behind the CLI: main comparison, stale campaign,
regime grid, threshold sensitivity and the profile descriptor.

Each function returns plain rows/dicts and leaves file writing to
``write_table``/``write_json`` so tests can call them directly.
"""
from __future__ import annotations

import dataclasses
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .audit import AuditSink
from .comparators import MAIN_SYSTEMS, SystemVariant
from .contract import ThresholdConfig, default_thresholds, load_preset_json
from .faults import FaultPlan, SlicePreset, campaign_stale, coarse_grid, dense_slices
from .metrics import METRIC_COLUMNS, RunCounts, RunMetrics, count, fmt, metric_row, write_csv
from .scenario.config import ScenarioConfig, load_scenario
from .scenario.engine import run_system
from .stats import dod_detector, fisher_exact, noninferiority, paired_bootstrap

DEFAULT_SEEDS = tuple(range(42, 52))
TAU_GRID = tuple(round(0.10 + 0.05 * i, 2) for i in range(9))


@dataclass(frozen=True)
class RunSpec:
    system: str
    uc: str
    seed: int
    epochs: int
    slice_name: str = "benign"
    scenario: ScenarioConfig | None = None
    thresholds: ThresholdConfig | None = None
    plan: FaultPlan = FaultPlan()
    audit_path: str | None = None
    keep_records: bool = False


@dataclass(frozen=True)
class RunOutput:
    spec: RunSpec
    counts: RunCounts
    kpis: dict[str, float]
    decisions: tuple[str, ...] = ()

    @property
    def metrics(self) -> RunMetrics:
        return RunMetrics.from_counts(self.counts)


def execute(spec: RunSpec) -> RunOutput:
    sink = AuditSink.to_file(spec.audit_path) if spec.audit_path else None
    try:
        res = run_system(
            spec.system, spec.uc, spec.seed, spec.epochs,
            scenario=spec.scenario, thresholds=spec.thresholds, plan=spec.plan, audit_sink=sink,
        )
    finally:
        if sink is not None:
            sink.close()
    decisions = tuple(r.terminal.value for r in res.records) if spec.keep_records else ()
    return RunOutput(spec, count(res.records), res.kpis, decisions)


def run_many(specs: Sequence[RunSpec], jobs: int = 1) -> list[RunOutput]:
    """Run independent specs, in a process pool when ``jobs > 1``. Results come
    back in input order either way."""
    if jobs <= 1 or len(specs) <= 1:
        return [execute(s) for s in specs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(execute, specs, chunksize=1))


def _audit_file(audit_dir: str | None, *parts: object) -> str | None:
    if not audit_dir:
        return None
    return str(Path(audit_dir) / ("_".join(str(p) for p in parts) + ".jsonl"))


# -- main comparison -------------------------------------------------------


def _ratio_deltas(a: Sequence[RunMetrics], b: Sequence[RunMetrics], attr: str) -> list[float]:
    out = []
    for x, y in zip(a, b):
        vx, vy = getattr(x, attr), getattr(y, attr)
        if vx is None or not vy:
            continue
        out.append(vx / vy - 1.0)
    return out


def _bootstrap_dict(deltas: Sequence[float]) -> dict[str, float] | None:
    if len(deltas) < 2:
        return None
    mean, lo, hi = paired_bootstrap(deltas)
    return {"mean": mean, "ci_low": lo, "ci_high": hi}


def pairwise_stats(by_system: Mapping[str, Sequence[RunOutput]]) -> dict[str, Any]:
    """Seed-paired statistics for OURS against FB-INV and ST-INV."""
    out: dict[str, Any] = {}
    ours = [o.metrics for o in by_system.get("OURS", ())]
    fb = [o.metrics for o in by_system.get("FB_INV", ())]
    st = [o.metrics for o in by_system.get("ST_INV", ())]
    if ours and fb:
        out["ours_vs_fb_inv"] = {
            "ttfsa_reduction": _bootstrap_dict(_ratio_deltas(ours, fb, "ttfsa_mean_ms")),
            "bytes_per_commit_reduction": _bootstrap_dict(_ratio_deltas(ours, fb, "bytes_per_commit")),
            "decision_identity": all(
                a.decisions == b.decisions for a, b in zip(by_system["OURS"], by_system["FB_INV"])
            ),
            "kpi_identity": all(
                a.kpis == b.kpis for a, b in zip(by_system["OURS"], by_system["FB_INV"])
            ),
        }
    if ours and st:
        du = [
            100.0 * (a.unsafe_rate - b.unsafe_rate)
            for a, b in zip(ours, st)
            if a.unsafe_rate is not None and b.unsafe_rate is not None
        ]
        ni = noninferiority(du) if len(du) >= 2 else None
        ko = sum(m.counts.unsafe_commits for m in ours)
        no = sum(m.counts.commits for m in ours)
        ks = sum(m.counts.unsafe_commits for m in st)
        ns = sum(m.counts.commits for m in st)
        out["ours_vs_st_inv"] = {
            "unsafe_diff_pp": None if ni is None else {"mean": ni.mean, "upper": ni.upper, "pass": ni.passed},
            "fisher_p": fisher_exact([[ko, no - ko], [ks, ns - ks]]),
            "ttfsa_delta_ms": _bootstrap_dict(
                [a.ttfsa_mean_ms - b.ttfsa_mean_ms for a, b in zip(ours, st)
                 if a.ttfsa_mean_ms is not None and b.ttfsa_mean_ms is not None]
            ),
        }
    return out


def main_experiment(
    uc: str,
    seeds: Sequence[int] = DEFAULT_SEEDS,
    epochs: int = 1000,
    systems: Sequence[SystemVariant | str] = MAIN_SYSTEMS,
    scenario: ScenarioConfig | None = None,
    thresholds: ThresholdConfig | None = None,
    jobs: int = 1,
    audit_dir: str | None = None,
) -> dict[str, Any]:
    names = [SystemVariant(s).value for s in systems]
    specs = [
        RunSpec(s, uc, seed, epochs, scenario=scenario, thresholds=thresholds,
                audit_path=_audit_file(audit_dir, uc, s, seed), keep_records=True)
        for s in names
        for seed in seeds
    ]
    outs = run_many(specs, jobs)
    by_system: dict[str, list[RunOutput]] = {s: [] for s in names}
    for o in outs:
        by_system[o.spec.system].append(o)
    metric_rows, kpi_rows = [], []
    for s in sorted(by_system):
        runs = sorted(by_system[s], key=lambda o: o.spec.seed)
        by_system[s] = runs
        for o in runs:
            metric_rows.append(metric_row(uc, s, "benign", o.spec.seed, o.metrics))
            kpi_rows.append({"uc": uc, "system": s, "seed": str(o.spec.seed), **{k: fmt(v) for k, v in sorted(o.kpis.items())}})
        total = RunCounts()
        for o in runs:
            total = total + o.counts
        metric_rows.append(metric_row(uc, s, "benign", "all", RunMetrics.from_counts(total)))
    return {
        "metrics": metric_rows,
        "kpis": kpi_rows,
        "stats": pairwise_stats(by_system),
        "runs": by_system,
    }


# -- stale campaign --------------------------------------------------------

STALE_COLUMNS = ("uc", "system", "stale_intents", "rejected", "rejection_rate", "cp_low", "cp_high")


def stale_experiment(uc: str, seeds: Sequence[int] = DEFAULT_SEEDS, epochs: int = 500,
                     scenario: ScenarioConfig | None = None,
                     thresholds: ThresholdConfig | None = None) -> list[dict[str, str]]:
    rows = campaign_stale(uc, list(seeds), epochs, scenario=scenario, thresholds=thresholds)
    return [
        {
            "uc": uc,
            "system": r.system,
            "stale_intents": fmt(r.stale_intents),
            "rejected": fmt(r.rejected),
            "rejection_rate": fmt(r.rate),
            "cp_low": fmt(r.cp_low),
            "cp_high": fmt(r.cp_high),
        }
        for r in rows
    ]


# -- regime grid -----------------------------------------------------------

REGIME_COLUMNS = (
    "uc", "slice", "seeds", "epochs",
    "ours_ttfsa_ms", "st_inv_ttfsa_ms", "fb_inv_ttfsa_ms",
    "delta_st_mean_ms", "delta_fb_mean_ms", "delta_fb_ci_low", "delta_fb_ci_high",
    "dod_mean_ms", "dod_ci_low", "dod_ci_high", "verdict",
)
REGIME_SYSTEMS = ("OURS", "ST_INV", "FB_INV")


def slice_scenario(base: ScenarioConfig, preset: SlicePreset) -> ScenarioConfig:
    return base.with_probabilities(**preset.probabilities) if preset.probabilities else base


@dataclass(frozen=True)
class SliceResult:
    name: str
    ttfsa: dict[str, list[float]]  # system -> per-seed TTFSA (seed order)

    def deltas(self, other: str) -> list[float]:
        return [a - b for a, b in zip(self.ttfsa["OURS"], self.ttfsa[other])]


def regime_runs(
    uc: str,
    slices: Sequence[SlicePreset],
    seeds: Sequence[int],
    epochs: int,
    scenario: ScenarioConfig | None = None,
    thresholds: ThresholdConfig | None = None,
    jobs: int = 1,
) -> list[SliceResult]:
    base = scenario or load_scenario(uc)
    specs = [
        RunSpec(s, uc, seed, epochs, p.name, slice_scenario(base, p), thresholds, p.faults)
        for p in slices
        for s in REGIME_SYSTEMS
        for seed in seeds
    ]
    outs = run_many(specs, jobs)
    table: dict[tuple[str, str], dict[int, float]] = {}
    for o in outs:
        v = o.metrics.ttfsa_mean_ms
        table.setdefault((o.spec.slice_name, o.spec.system), {})[o.spec.seed] = 0.0 if v is None else v
    return [
        SliceResult(p.name, {s: [table[(p.name, s)][sd] for sd in seeds] for s in REGIME_SYSTEMS})
        for p in slices
    ]


def regime_rows(uc: str, results: Sequence[SliceResult], epochs: int) -> list[dict[str, str]]:
    benign = next(r for r in results if r.name == "benign")
    ref = benign.deltas("ST_INV")
    mean = lambda xs: sum(xs) / len(xs)
    rows = []
    for r in results:
        dst, dfb = r.deltas("ST_INV"), r.deltas("FB_INV")
        _, fb_lo, fb_hi = paired_bootstrap(dfb)
        row = {
            "uc": uc,
            "slice": r.name,
            "seeds": len(dst),
            "epochs": epochs,
            "ours_ttfsa_ms": mean(r.ttfsa["OURS"]),
            "st_inv_ttfsa_ms": mean(r.ttfsa["ST_INV"]),
            "fb_inv_ttfsa_ms": mean(r.ttfsa["FB_INV"]),
            "delta_st_mean_ms": mean(dst),
            "delta_fb_mean_ms": mean(dfb),
            "delta_fb_ci_low": fb_lo,
            "delta_fb_ci_high": fb_hi,
            "dod_mean_ms": None,
            "dod_ci_low": None,
            "dod_ci_high": None,
            "verdict": "ref.",
        }
        if r is not benign:
            d = dod_detector(dst, ref)
            row.update(
                dod_mean_ms=d.mean, dod_ci_low=d.ci_low, dod_ci_high=d.ci_high,
                verdict="material" if d.material else "not material",
            )
        rows.append({k: fmt(row[k]) for k in REGIME_COLUMNS})
    return rows


def regime_experiment(
    uc: str,
    mode: str = "dense",
    seeds: Sequence[int] | None = None,
    epochs: int | None = None,
    slice_name: str | None = None,
    scenario: ScenarioConfig | None = None,
    thresholds: ThresholdConfig | None = None,
    jobs: int = 1,
) -> list[dict[str, str]]:
    if mode == "dense":
        slices = dense_slices()
        seeds = seeds if seeds is not None else DEFAULT_SEEDS
        epochs = epochs or 1000
    elif mode == "coarse":
        slices = coarse_grid()
        seeds = seeds if seeds is not None else DEFAULT_SEEDS[:3]
        epochs = epochs or 500
    else:
        raise ValueError(f"unknown regime mode {mode!r}")
    if slice_name:
        picked = [p for p in slices if p.name == slice_name]
        if not picked:
            raise ValueError(f"unknown slice {slice_name!r}")
        slices = [slices[0]] + [p for p in picked if p.name != "benign"]
    results = regime_runs(uc, slices, seeds, epochs, scenario, thresholds, jobs)
    return regime_rows(uc, results, epochs)


# -- threshold sensitivity -------------------------------------------------

SENSITIVITY_COLUMNS = ("uc", "tau_commit", "tau_degraded", "seeds", "commits", "ttfsa_mean_ms", "unsafe_rate", "yield")


def sweep_thresholds(base: ThresholdConfig, tau: float) -> ThresholdConfig:
    """Move tau_commit; tau_degraded is lifted just above it where needed to
    keep the configured ordering valid."""
    deg = base.tau_degraded if tau < base.tau_degraded else round(tau + 0.05, 4)
    return dataclasses.replace(base, tau_commit=tau, tau_degraded=deg)


def sensitivity_experiment(
    uc: str = "uc1",
    taus: Iterable[float] = TAU_GRID,
    seeds: Sequence[int] = DEFAULT_SEEDS,
    epochs: int = 1000,
    scenario: ScenarioConfig | None = None,
    thresholds: ThresholdConfig | None = None,
    jobs: int = 1,
) -> list[dict[str, str]]:
    base = thresholds or default_thresholds(uc)
    grid = [sweep_thresholds(base, t) for t in taus]
    specs = [RunSpec("OURS", uc, sd, epochs, scenario=scenario, thresholds=th) for th in grid for sd in seeds]
    outs = run_many(specs, jobs)
    rows = []
    for i, th in enumerate(grid):
        total = RunCounts()
        for o in outs[i * len(seeds):(i + 1) * len(seeds)]:
            total = total + o.counts
        m = RunMetrics.from_counts(total)
        row = {
            "uc": uc,
            "tau_commit": f"{th.tau_commit:.2f}",
            "tau_degraded": f"{th.tau_degraded:.2f}",
            "seeds": len(seeds),
            "commits": total.commits,
            "ttfsa_mean_ms": m.ttfsa_mean_ms,
            "unsafe_rate": m.unsafe_rate,
            "yield": m.yield_,
        }
        rows.append({k: fmt(row[k]) for k in SENSITIVITY_COLUMNS})
    return rows


# -- profile descriptor ----------------------------------------------------


def profile_descriptor() -> dict[str, Any]:
    return load_preset_json("profile.json")


def profile_text() -> str:
    # key order is part of the descriptor, so it is kept as shipped
    return json.dumps(profile_descriptor(), indent=2) + "\n"


# -- output ----------------------------------------------------------------


def write_table(path: Path, rows: Sequence[Mapping[str, str]], columns: Sequence[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        write_csv(rows, columns, fh)


def write_json(path: Path, obj: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def kpi_columns(rows: Sequence[Mapping[str, str]]) -> list[str]:
    keys = sorted({k for r in rows for k in r} - {"uc", "system", "seed"})
    return ["uc", "system", "seed", *keys]


__all__ = [
    "DEFAULT_SEEDS", "METRIC_COLUMNS", "REGIME_COLUMNS", "SENSITIVITY_COLUMNS", "STALE_COLUMNS", "TAU_GRID",
    "RunSpec", "RunOutput", "execute", "run_many", "main_experiment", "pairwise_stats", "stale_experiment",
    "regime_runs", "regime_rows", "regime_experiment", "sensitivity_experiment", "sweep_thresholds",
    "profile_descriptor", "profile_text", "write_table", "write_json", "kpi_columns",
]
