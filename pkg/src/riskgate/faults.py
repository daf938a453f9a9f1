"""Fault injectors and the regime-grid slice presets."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Any, Mapping

from .contract import CATALOG, ActionType, ControlIntent, ReversibilityClass, load_preset_json
from .scenario.streams import substream

AXES = ("stale", "conflict", "deadline_squeeze", "verifier_fault", "risk_divergence", "rollback_corruption")


@dataclass(frozen=True)
class FaultPlan:
    stale_prob: float = 0.0
    conflict_prob: float = 0.0
    deadline_squeeze_prob: float = 0.0
    verifier_fault_prob: float = 0.0
    risk_divergence_prob: float = 0.0
    rollback_corruption_prob: float = 0.0
    stale_extra_mean: float = 2.0  # extra epochs beyond delta for injected gaps

    def __post_init__(self) -> None:
        for f in dataclasses.fields(self):
            if f.name.endswith("_prob"):
                v = getattr(self, f.name)
                if not 0.0 <= v <= 1.0:
                    raise ValueError(f"{f.name}={v} outside [0, 1]")

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> FaultPlan:
        return cls(**{k: float(v) for k, v in d.items()})

    def prob(self, axis: str) -> float:
        return float(getattr(self, f"{axis}_prob"))


@dataclass(frozen=True)
class CandidateIntent:
    """One epoch's candidate: the C0 intent plus hidden scenario labels."""

    intent: ControlIntent
    action: Any  # scenario Action; never handed to the executor
    would_be_safe: bool
    gap: int
    injected_faults: frozenset[str] = frozenset()
    synthetic_conflicts: tuple[ControlIntent, ...] = ()
    flip_verifier: int | None = None


@dataclass(frozen=True)
class InjectionContext:
    seed: int
    epoch: int
    now_ms: float
    delta_epochs: int
    d_min_s: float
    eps_trust: float
    n_verifiers: int = 2


def synthetic_conflict(c: ControlIntent, tag: str) -> ControlIntent:
    """An active intent of a different type on the same scope and keys."""
    other = next(t for t in ActionType if t is not c.intent_type and CATALOG[t][0] is not ReversibilityClass.IRREVERSIBLE)
    return ControlIntent(
        intent_id=f"x{tag}",
        intent_type=other,
        proposed_action={"synthetic": 1},
        target_scope=c.target_scope[:1],
        resource_keys=c.resource_keys[:1],
        state_epoch=c.state_epoch,
        expires_at=c.expires_at,
        reversibility_class=CATALOG[other][0],
        risk_score=0.5,
    )


def inject(plan: FaultPlan, cand: CandidateIntent, ctx: InjectionContext) -> CandidateIntent:
    """Apply each enabled fault axis from its own substream."""
    c = cand.intent
    tags = set(cand.injected_faults)
    conflicts = list(cand.synthetic_conflicts)
    flip = cand.flip_verifier
    gap = cand.gap

    def fires(axis: str) -> tuple[bool, Any]:
        p = plan.prob(axis)
        if p <= 0.0:
            return False, None
        rng = substream(ctx.seed, ctx.epoch, "fault", axis)
        return rng.random() < p, rng

    hit, rng = fires("stale")
    if hit:
        extra = 0
        q = 1 - 1 / (1 + plan.stale_extra_mean)
        while rng.random() < q and extra < 20:
            extra += 1
        gap = ctx.delta_epochs + 1 + extra
        env = c.envelope
        c = dataclasses.replace(
            c,
            state_epoch=ctx.epoch - gap,
            envelope=dataclasses.replace(env, state_epoch=ctx.epoch - gap) if env else None,
        )
        tags.add("stale")
    hit, rng = fires("conflict")
    if hit:
        conflicts.append(synthetic_conflict(c, f"{ctx.epoch}f"))
        tags.add("conflict")
    hit, rng = fires("deadline_squeeze")
    if hit:
        c = dataclasses.replace(c, expires_at=ctx.now_ms + 1000.0 * rng.uniform(0.1, 0.9) * ctx.d_min_s)
        tags.add("deadline_squeeze")
    hit, rng = fires("verifier_fault")
    if hit:
        flip = rng.randrange(ctx.n_verifiers)
        tags.add("verifier_fault")
    hit, rng = fires("risk_divergence")
    if hit:
        bump = rng.uniform(ctx.eps_trust + 0.05, ctx.eps_trust + 0.3)
        r = c.risk_score + bump
        if r > 1.0:
            r = c.risk_score - bump
        c = dataclasses.replace(c, risk_score=round(min(max(r, 0.0), 1.0), 4))
        tags.add("risk_divergence")
    hit, rng = fires("rollback_corruption")
    if hit and c.rollback_handle is not None:
        h = c.rollback_handle
        if rng.random() < 0.5:
            h = dataclasses.replace(h, consumed=True)
        else:
            h = dataclasses.replace(h, expires_at=ctx.now_ms - 1000.0)
        c = dataclasses.replace(c, rollback_handle=h)
        tags.add("rollback_corruption")
    if c is cand.intent and not conflicts and flip is cand.flip_verifier:
        return cand
    return dataclasses.replace(
        cand,
        intent=c,
        gap=gap,
        injected_faults=frozenset(tags),
        synthetic_conflicts=tuple(conflicts),
        flip_verifier=flip,
    )


# -- slice presets ---------------------------------------------------------


@dataclass(frozen=True)
class SlicePreset:
    name: str
    probabilities: Mapping[str, float] = field(default_factory=dict)
    faults: FaultPlan = FaultPlan()

    @classmethod
    def from_dict(cls, name: str, d: Mapping[str, Any]) -> SlicePreset:
        return cls(name, dict(d.get("probabilities", {})), FaultPlan.from_dict(d.get("faults", {})))


def load_slices() -> dict[str, SlicePreset]:
    raw = load_preset_json("slices.json")
    return {name: SlicePreset.from_dict(name, d) for name, d in raw["slices"].items()}


def coarse_grid() -> list[SlicePreset]:
    raw = load_preset_json("slices.json")
    out = [SlicePreset("benign")]
    for axis, spec in raw["grid"]["axes"].items():
        section = spec["section"]
        for level in spec["levels"]:
            name = f"{axis}={level}"
            if section == "probabilities":
                out.append(SlicePreset(name, {axis: float(level)}))
            else:
                out.append(SlicePreset(name, {}, FaultPlan.from_dict({axis: level})))
    for name, d in raw["grid"]["composites"].items():
        out.append(SlicePreset.from_dict(name, d))
    return out


def dense_slices() -> list[SlicePreset]:
    s = load_slices()
    return [s[n] for n in ("benign", "risk_p30", "conflict_high", "composite_severe")]


def dump_plan(plan: FaultPlan) -> str:
    return json.dumps(dataclasses.asdict(plan), sort_keys=True)


# -- stale-state campaign --------------------------------------------------


@dataclass(frozen=True)
class StaleRow:
    system: str
    stale_intents: int
    rejected: int
    rate: float
    cp_low: float
    cp_high: float


def campaign_stale(
    uc: str,
    seeds: range | list[int] = range(42, 52),
    epochs: int = 500,
    systems: tuple[str, ...] = ("OURS", "FB_INV", "ST_INV", "BL4_LEGACY", "C0_ONLY"),
    scenario: Any = None,
    thresholds: Any = None,
) -> list[StaleRow]:
    """Every epoch carries a gap beyond the staleness bound; count Stage-1
    rejections per system with a Clopper-Pearson interval."""
    # the engine imports this module, so it is pulled in lazily
    from .metrics import count
    from .scenario.engine import run_system
    from .stats import clopper_pearson

    plan = FaultPlan(stale_prob=1.0)
    rows = []
    for system in systems:
        k = n = 0
        for seed in seeds:
            res = run_system(
                system, uc, seed, epochs, scenario=scenario, thresholds=thresholds, plan=plan,
                audit_enabled=False,
            )
            c = count(res.records)
            k += c.stale_rejected
            n += c.stale_tagged
        lo, hi = clopper_pearson(k, n)
        rows.append(StaleRow(system, n, k, k / n if n else 0.0, lo, hi))
    return rows
