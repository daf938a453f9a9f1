"""Deterministic run loop: candidate generation, fault injection, one system
pipeline per run, truth labeling and KPI accumulation."""
from __future__ import annotations

import dataclasses
import math
import random
from dataclasses import dataclass, field
from typing import Sequence

from ..audit import AuditSink
from ..comparators import RUNNERS, SystemVariant
from ..contract import (
    CATALOG,
    UC1_ACTIONS,
    UC2_ACTIONS,
    ActionType,
    ConstraintRecord,
    ControlIntent,
    CoordinationEvidence,
    ReversibilityClass,
    RollbackHandle,
    ThresholdConfig,
    TransactionEnvelope,
    default_thresholds,
)
from ..executor import DecisionRecord, ExecutorState, RunLabels
from ..faults import CandidateIntent, FaultPlan, InjectionContext, inject, synthetic_conflict
from ..risk import overlapping
from ..verifiers import Vote, flip, quorum_latency
from .config import ScenarioConfig, load_scenario
from .network import Action, KpiAccumulator
from .streams import substream
from .uc1 import UC1Network
from .uc2 import UC2Network

LOOKBACK = 64
POLICY_VERSION = "pv1"
POLICY_DIGEST = "9f2c41aa"
HANDLE_TTL_MS = 600_000.0
ENVELOPE_GRACE_MS = 30_000.0
MAX_GAP = 40

PROCEDURES = {t: f"u{i}" for i, t in enumerate(ActionType)}


def start_epoch(seed: int, period: int) -> int:
    """Seed-dependent time of day at which the run begins."""
    return LOOKBACK + substream(seed, "start").randrange(period)


def make_network(cfg: ScenarioConfig, seed: int, first: int, count: int):
    if cfg.uc == "uc1":
        return UC1Network(cfg, seed, first, count)
    if cfg.uc == "uc2":
        return UC2Network(cfg, seed, first, count)
    raise ValueError(f"unknown use case {cfg.uc!r}")


def draw_gap(rng: random.Random, p_stale: float, p_lag: float, delta: int) -> int:
    """Epoch gap: zero with prob 1-p_lag, otherwise 1 + geometric tail tuned so
    that P(gap > delta) = p_stale."""
    u_lag = rng.random()
    if p_stale <= 0 or u_lag >= max(p_lag, p_stale):
        return 0
    lag = max(p_lag, p_stale)
    q = (p_stale / lag) ** (1.0 / delta) if delta > 0 else 0.0
    gap = 1
    while gap < MAX_GAP and rng.random() < q:
        gap += 1
    return gap


def _noisy(view, rng: random.Random, sigma: float):
    if view and isinstance(view[0], list):
        return [[max(0.0, x + rng.gauss(0.0, sigma) * x) for x in row] for row in view]
    return [max(0.0, x + rng.gauss(0.0, sigma)) for x in view]


def generate_candidate(
    t: int,
    net,
    state: ExecutorState,
    cfg: ScenarioConfig,
    seed: int,
) -> CandidateIntent:
    """Build the epoch's C0 intent from the planner's lagged, noisy view."""
    pr = cfg.probabilities
    th = state.config
    g = substream(seed, t, "gen")
    gap = draw_gap(g, pr.p_stale, pr.p_lag, state.delta_epochs)
    u_block, u_upg, u_late, u_conf = g.random(), g.random(), g.random(), g.random()
    z_deadline = g.gauss(0.0, 1.0)
    late_ms = g.uniform(1.0, 2000.0)
    risk_noise = g.gauss(0.0, cfg.planner.risk_noise)

    view = _noisy(net.demand_est(t - gap), substream(seed, t, "telemetry"), cfg.planner.telemetry_noise)
    action: Action = net.propose(view, substream(seed, t, "planner"))
    rev, rclass = CATALOG[action.type]
    iid = f"i{t}"
    probe = ControlIntent(
        iid, action.type, {}, action.scope, action.keys, t - gap, 1.0, rev, 0.0
    )
    w_t, _, w_c, w_n = th.weights
    c_plan = min(len(overlapping(probe, state.active_intents)) / state.uc_max, 1.0)
    r_plan = w_t * rclass.phi + w_c * c_plan + w_n * net.view_contention(action, view) + risk_noise
    r_plan = round(min(max(r_plan, 0.0), 1.0), 4)

    now = state.now_ms
    if u_late < pr.p_late:
        expires = now - late_ms
    else:
        d = pr.deadline_factor * cfg.deadline.median_s * math.exp(cfg.deadline.sigma * z_deadline)
        expires = now + 1000.0 * d
    expires = round(expires)
    handle = None
    if rev is not ReversibilityClass.IRREVERSIBLE:
        handle = RollbackHandle(f"h{t}", action.scope[0], POLICY_VERSION, now + HANDLE_TTL_MS, PROCEDURES[action.type])
    env = TransactionEnvelope(
        f"t{t}", t - gap, expires + ENVELOPE_GRACE_MS, f"k{t}", action.scope, policy_digest=POLICY_DIGEST
    )
    params = dict(action.params)
    params["direction"] = action.direction
    intent = ControlIntent(
        intent_id=iid,
        intent_type=action.type,
        proposed_action=params,
        target_scope=action.scope,
        resource_keys=action.keys,
        state_epoch=t - gap,
        expires_at=float(expires),
        reversibility_class=rev,
        risk_score=r_plan,
        rollback_handle=handle,
        needs_upgrade=r_plan > cfg.planner.upgrade_threshold or u_upg < pr.p_upg,
        blocking_req=frozenset({"maint-window"}) if u_block < pr.p_block else frozenset(),
        envelope=env,
    )
    conflicts: tuple[ControlIntent, ...] = ()
    tags: set[str] = set()
    if u_conf < pr.p_conflict:
        conflicts = (synthetic_conflict(intent, str(t)),)
        tags.add("conflict")
    return CandidateIntent(
        intent=intent,
        action=action,
        would_be_safe=net.is_safe(action, t),
        gap=gap,
        injected_faults=frozenset(tags),
        synthetic_conflicts=conflicts,
    )


class EpochServices:
    """Stage-2 capabilities for one epoch: C1 fetch, verifier votes, latency."""

    def __init__(self, net, cand: CandidateIntent, seed: int, t: int, cfg: ScenarioConfig) -> None:
        self.net = net
        self.cand = cand
        self.seed = seed
        self.t = t
        self.cfg = cfg
        self._latency: float | None = None
        self._evidence: CoordinationEvidence | None = None

    def fetch_c1(self, c: ControlIntent, state: ExecutorState) -> CoordinationEvidence:
        if self._evidence is None or self._evidence.intent_id != c.intent_id:
            stale = abs(state.epoch - c.state_epoch) > 0
            self._evidence = CoordinationEvidence(
                intent_id=c.intent_id,
                constraint_summary=self.net.constraints(self.cand.action, self.t),
                conflict_candidates=tuple(a.intent_id for a in overlapping(c, state.active_intents))[:10],
                missing_information=(f"telemetry@{c.state_epoch}",) if stale else (),
                snapshot_epoch=state.epoch,
                evidence_uri=f"ev://{self.cfg.uc}/{self.seed}/{c.intent_id}",
            )
        return self._evidence

    def votes(self, c: ControlIntent, evidence: CoordinationEvidence) -> list[Vote]:
        vs = self.net.votes(self.cand.action, self.t, substream(self.seed, self.t, "verifier"))
        if self.cand.flip_verifier is not None:
            i = self.cand.flip_verifier % len(vs)
            vs[i] = flip(vs[i])
        return vs

    def eager_latency_ms(self) -> float:
        if self._latency is None:
            lm = self.cfg.latency
            sigma = lm.eager_sigma
            mu = math.log(lm.eager_mean_ms) - sigma * sigma / 2
            self._latency = quorum_latency(substream(self.seed, self.t, "latency"), mu, sigma)
        return self._latency


@dataclass
class RunResult:
    uc: str
    system: str
    seed: int
    records: list[DecisionRecord]
    kpis: dict[str, float]
    candidates: list[CandidateIntent] = field(default_factory=list)


def bandwidth_budget(seed: int, t: int, cfg: ScenarioConfig) -> float:
    bw = cfg.bandwidth
    return round(substream(seed, t, "bandwidth").lognormvariate(0.0, bw.sigma) * bw.median_bytes)


def run_system(
    system: SystemVariant | str,
    uc: str,
    seed: int,
    epochs: int,
    *,
    scenario: ScenarioConfig | None = None,
    thresholds: ThresholdConfig | None = None,
    plan: FaultPlan = FaultPlan(),
    audit_enabled: bool = True,
    audit_sink: AuditSink | None = None,
    keep_candidates: bool = False,
) -> RunResult:
    system = SystemVariant(system)
    cfg = scenario or load_scenario(uc)
    th = thresholds or default_thresholds(cfg.uc)
    first = start_epoch(seed, cfg.load.period)
    net = make_network(cfg, seed, first - LOOKBACK, epochs + LOOKBACK)
    state = ExecutorState(
        config=th,
        epoch=first,
        now_ms=first * cfg.epoch_s * 1000.0,
        epoch_s=cfg.epoch_s,
        uc_max=cfg.uc_max,
        verifier_set=("v0", "v1"),
        policy_version=POLICY_VERSION,
        reachable_scopes=frozenset(net.objects()),
        procedures=frozenset(PROCEDURES.values()),
    )
    runner = RUNNERS[system]
    labels = RunLabels(seed, cfg.uc, system.value)
    acc = KpiAccumulator()
    records: list[DecisionRecord] = []
    kept: list[CandidateIntent] = []
    for i in range(epochs):
        t = first + i
        gone = set(net.prune(t))
        if gone:
            state.active_intents = [a for a in state.active_intents if a.intent_id not in gone]
        state.advance(t, t * cfg.epoch_s * 1000.0)
        state.utilization = net.utilization(t)
        state.bandwidth_budget = bandwidth_budget(seed, t, cfg)
        cand = generate_candidate(t, net, state, cfg, seed)
        ctx = InjectionContext(seed, t, state.now_ms, state.delta_epochs, th.d_min_s, th.eps_trust)
        cand = inject(plan, cand, ctx)
        synth = list(cand.synthetic_conflicts)
        state.active_intents.extend(synth)
        services = EpochServices(net, cand, seed, t, cfg)
        rec = runner(cand.intent, state, services, labels, audit_sink, audit_enabled)
        if synth:
            ids = {s.intent_id for s in synth}
            state.active_intents = [a for a in state.active_intents if a.intent_id not in ids]
        stale = cand.gap > state.delta_epochs
        if rec.committed:
            net.commit(cand.action, cand.intent.intent_id, t)
            rec = dataclasses.replace(rec, unsafe_label=not cand.would_be_safe, stale_tagged=stale)
        elif stale:
            rec = dataclasses.replace(rec, stale_tagged=True)
        records.append(rec)
        if keep_candidates:
            kept.append(cand)
        net.kpi_step(t, acc)
    return RunResult(cfg.uc, system.value, seed, records, net.kpi_summary(acc), kept)


def catalog_for(uc: str) -> Sequence[ActionType]:
    return UC1_ACTIONS if uc == "uc1" else UC2_ACTIONS
