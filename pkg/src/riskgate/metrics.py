"""Per-run metric accumulation over decision records.

Metrics are derived from integer counts and sums so that runs can be merged
across seeds by adding counts rather than by averaging rates.
"""
from __future__ import annotations

import csv
import dataclasses
import io
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .audit import AuditKind
from .contract import Stage1, Terminal
from .executor import DecisionRecord


@dataclass(frozen=True)
class RunCounts:
    intents: int = 0
    commits: int = 0
    c0_commits: int = 0
    stage2_commits: int = 0
    degraded_commits: int = 0
    degraded_entries: int = 0
    unsafe_commits: int = 0
    unsafe_c0_commits: int = 0
    unsafe_stage2_commits: int = 0
    stale_tagged: int = 0
    stale_rejected: int = 0
    c1_fetches: int = 0
    full_c2_commits: int = 0
    bytes_total: int = 0
    commit_latency_ms: float = 0.0

    def __add__(self, other: RunCounts) -> RunCounts:
        return RunCounts(
            **{f.name: getattr(self, f.name) + getattr(other, f.name) for f in dataclasses.fields(self)}
        )


@dataclass(frozen=True)
class RunMetrics:
    """Rates for one run (or a merged group of runs). ``None`` marks a value
    that is undefined because the run produced no commits."""

    ttfsa_mean_ms: float | None
    bytes_per_commit: float | None
    unsafe_rate: float | None
    stale_rejection_rate: float | None
    yield_: float
    c0_commit_share: float | None
    upgrade_freq: float
    full_c2_coverage: float | None
    per_stage_unsafe: tuple[float | None, float | None]
    degraded_branch_entry_rate: float
    degraded_commit_count: int
    counts: RunCounts

    @property
    def zero_commits(self) -> bool:
        return self.counts.commits == 0

    @classmethod
    def from_counts(cls, n: RunCounts) -> RunMetrics:
        def ratio(a: float, b: float) -> float | None:
            return a / b if b else None

        return cls(
            ttfsa_mean_ms=ratio(n.commit_latency_ms, n.commits),
            bytes_per_commit=ratio(n.bytes_total, n.commits),
            unsafe_rate=ratio(n.unsafe_commits, n.commits),
            stale_rejection_rate=ratio(n.stale_rejected, n.stale_tagged),
            yield_=(n.commits - n.unsafe_commits) / n.intents if n.intents else 0.0,
            c0_commit_share=ratio(n.c0_commits, n.commits),
            upgrade_freq=n.c1_fetches / n.intents if n.intents else 0.0,
            full_c2_coverage=ratio(n.full_c2_commits, n.commits),
            per_stage_unsafe=(
                ratio(n.unsafe_c0_commits, n.c0_commits),
                ratio(n.unsafe_stage2_commits, n.stage2_commits),
            ),
            degraded_branch_entry_rate=n.degraded_entries / n.intents if n.intents else 0.0,
            degraded_commit_count=n.degraded_commits,
            counts=n,
        )


def count(records: Iterable[DecisionRecord]) -> RunCounts:
    k = dict.fromkeys((f.name for f in dataclasses.fields(RunCounts)), 0)
    k["commit_latency_ms"] = 0.0
    for r in records:
        k["intents"] += 1
        k["bytes_total"] += r.bytes_charged
        k["c1_fetches"] += r.c1_fetched
        k["degraded_entries"] += r.degraded_entry
        if r.stale_tagged:
            k["stale_tagged"] += 1
            k["stale_rejected"] += r.stage1 is Stage1.REJECT
        if r.terminal is not Terminal.COMMIT:
            continue
        unsafe = bool(r.unsafe_label)
        k["commits"] += 1
        k["commit_latency_ms"] += r.latency_ms
        k["unsafe_commits"] += unsafe
        # a commit counts as C0-only when nothing beyond C0 was retrieved for it
        if r.stage1 is Stage1.COMMIT and not r.c1_fetched:
            k["c0_commits"] += 1
            k["unsafe_c0_commits"] += unsafe
        else:
            k["stage2_commits"] += 1
            k["unsafe_stage2_commits"] += unsafe
        k["degraded_commits"] += r.degraded
        k["full_c2_commits"] += r.audit_kind == AuditKind.FULL_C2.value
    return RunCounts(**k)


def accumulate(records: Iterable[DecisionRecord]) -> RunMetrics:
    return RunMetrics.from_counts(count(records))


def merge(parts: Sequence[RunMetrics]) -> RunMetrics:
    total = RunCounts()
    for p in parts:
        total = total + p.counts
    return RunMetrics.from_counts(total)


# -- CSV -------------------------------------------------------------------

METRIC_COLUMNS = (
    "uc",
    "system",
    "slice",
    "seed",
    "epochs",
    "commits",
    "ttfsa_mean_ms",
    "bytes_per_commit",
    "unsafe_rate",
    "stale_rejection_rate",
    "yield",
    "c0_commit_share",
    "upgrade_freq",
    "full_c2_coverage",
    "c0_unsafe_rate",
    "stage2_unsafe_rate",
    "degraded_branch_entry_rate",
    "degraded_commit_count",
)


def fmt(v: object) -> str:
    """Stable text form: absent values are empty, floats carry 6 decimals."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def metric_row(uc: str, system: str, slice_name: str, seed: int | str, m: RunMetrics) -> dict[str, str]:
    vals = {
        "uc": uc,
        "system": system,
        "slice": slice_name,
        "seed": seed,
        "epochs": m.counts.intents,
        "commits": m.counts.commits,
        "ttfsa_mean_ms": m.ttfsa_mean_ms,
        "bytes_per_commit": m.bytes_per_commit,
        "unsafe_rate": m.unsafe_rate,
        "stale_rejection_rate": m.stale_rejection_rate,
        "yield": m.yield_,
        "c0_commit_share": m.c0_commit_share,
        "upgrade_freq": m.upgrade_freq,
        "full_c2_coverage": m.full_c2_coverage,
        "c0_unsafe_rate": m.per_stage_unsafe[0],
        "stage2_unsafe_rate": m.per_stage_unsafe[1],
        "degraded_branch_entry_rate": m.degraded_branch_entry_rate,
        "degraded_commit_count": m.degraded_commit_count,
    }
    return {k: fmt(vals[k]) for k in METRIC_COLUMNS}


def write_csv(rows: Sequence[Mapping[str, str]], columns: Sequence[str], fh: io.TextIOBase) -> None:
    w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
