"""Executor-side actuation contract: local predicates, two-stage triage and
the per-intent decision record."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Protocol, Sequence

from . import audit
from .contract import (
    CATALOG,
    EVIDENCE_MANDATORY,
    ActionType,
    ControlIntent,
    CoordinationEvidence,
    Decision,
    GateReason,
    ReversibilityClass,
    RollbackHandle,
    Stage1,
    Terminal,
    ThresholdConfig,
    serialize_c0,
    serialize_c1,
)
from .risk import combine, delta_epochs, risk_inputs
from .verifiers import Outcome, Vote, quorum

LOCAL_TRIAGE_MS = 10.0


class C1FetchFailure(RuntimeError):
    """C1 retrieval started but could not complete."""


@dataclass
class ExecutorState:
    """Mutable executor view. One writer per run."""

    config: ThresholdConfig
    epoch: int
    now_ms: float
    epoch_s: float
    uc_max: int
    active_intents: list[ControlIntent] = field(default_factory=list)
    rollback_registry: dict[str, RollbackHandle] = field(default_factory=dict)
    utilization: dict[str, tuple[float, float]] = field(default_factory=dict)
    bandwidth_budget: float = math.inf
    verifier_set: tuple[str, ...] = ()
    policy_version: str = "pv1"
    reachable_scopes: frozenset[str] = frozenset()
    procedures: frozenset[str] = frozenset()
    seen_transactions: dict[str, str] = field(default_factory=dict)

    @property
    def delta_epochs(self) -> int:
        return delta_epochs(self.config.delta_staleness_s, self.epoch_s)

    def advance(self, epoch: int, now_ms: float) -> None:
        if epoch < self.epoch:
            raise ValueError("executor epoch must not go backwards")
        self.epoch = epoch
        self.now_ms = now_ms


@dataclass(frozen=True)
class Policy:
    """Decision-logic variations shared by the invariant-respecting pipelines."""

    name: str = "OURS"
    risk_mode: str = "full"  # full | type_only | no_wireless
    staleness_guard: bool = True
    force_degraded: bool = False
    degraded_as_reversible: bool = False


OURS_POLICY = Policy()


class Stage2Services(Protocol):
    def fetch_c1(self, c: ControlIntent, state: ExecutorState) -> CoordinationEvidence: ...

    def votes(self, c: ControlIntent, evidence: CoordinationEvidence) -> Sequence[Vote]: ...

    def eager_latency_ms(self) -> float: ...


@dataclass(frozen=True)
class GateContext:
    intent: ControlIntent
    gate_reason: GateReason
    r_local: float
    d_remaining: float  # seconds
    b_available: float  # bytes

    def __post_init__(self) -> None:
        if self.gate_reason is GateReason.NONE:
            raise ValueError("a gate context needs a concrete gate reason")


@dataclass(frozen=True)
class DecisionRecord:
    seed: int
    epoch: int
    uc: str
    system: str
    intent_id: str
    stage1: Stage1
    gate_reason: GateReason
    stage2: Terminal | None
    terminal: Terminal
    degraded: bool
    r_local: float | None
    bytes_charged: int
    latency_ms: float
    path_trace: tuple[str, ...]
    unsafe_label: bool | None
    audit_kind: str
    c1_fetched: bool = False
    degraded_entry: bool = False
    decided_at_ms: float = 0.0
    stale_tagged: bool = False
    c0_bytes: int = 0
    c1_bytes: int = 0
    c2_bytes: int = 0

    @property
    def decision(self) -> Decision:
        return Decision(self.stage1, self.gate_reason, self.stage2, self.terminal, self.degraded)

    @property
    def committed(self) -> bool:
        return self.terminal is Terminal.COMMIT

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "epoch": self.epoch,
            "uc": self.uc,
            "system": self.system,
            "stage1": self.stage1.value,
            "gate_reason": self.gate_reason.value,
            "stage2": self.stage2.value if self.stage2 else None,
            "terminal": self.terminal.value,
            "degraded": self.degraded,
            "r_local": None if self.r_local is None else round(self.r_local, 6),
            "bytes_charged": self.bytes_charged,
            "latency_ms": round(self.latency_ms, 3),
            "path_trace": list(self.path_trace),
            "unsafe_label": self.unsafe_label,
            "audit_kind": self.audit_kind,
        }


# -- local predicates ------------------------------------------------------


def schema_valid(c: Any) -> bool:
    try:
        if not isinstance(c, ControlIntent):
            return False
        if not isinstance(c.intent_id, str) or not c.intent_id:
            return False
        t = ActionType(c.intent_type)
        if c.intent_type is not t:
            return False
        if not isinstance(c.reversibility_class, ReversibilityClass):
            return False
        if c.reversibility_class is not CATALOG[t][0]:
            return False
        r = c.risk_score
        if isinstance(r, bool) or not isinstance(r, (int, float)) or not math.isfinite(r):
            return False
        if not 0.0 <= r <= 1.0:
            return False
        if not c.target_scope or not c.resource_keys:
            return False
        if not all(isinstance(x, str) and x for x in (*c.target_scope, *c.resource_keys)):
            return False
        if not isinstance(c.state_epoch, int) or isinstance(c.state_epoch, bool):
            return False
        if not isinstance(c.expires_at, (int, float)) or not math.isfinite(c.expires_at):
            return False
        if not isinstance(c.proposed_action, Mapping):
            return False
        if not isinstance(c.needs_upgrade, bool):
            return False
        if not all(isinstance(tok, str) for tok in c.blocking_req):
            return False
    except (ValueError, TypeError, AttributeError, KeyError):
        return False
    return True


def valid_envelope(c: ControlIntent, e: ExecutorState) -> bool:
    env = c.envelope
    if env is None:
        return True
    if not (isinstance(env.transaction_id, str) and env.transaction_id):
        return False
    if not (isinstance(env.idempotency_key, str) and env.idempotency_key):
        return False
    if not (isinstance(env.state_epoch, int) and env.state_epoch >= 0):
        return False
    if not (math.isfinite(env.expires_at) and env.expires_at > 0):
        return False
    if env.expires_at < e.now_ms:
        return False
    if env.state_epoch > e.epoch:
        return False
    prior = e.seen_transactions.get(env.transaction_id)
    return prior is None or prior == env.idempotency_key


def valid_rollback(h: RollbackHandle | None, e: ExecutorState) -> bool:
    if h is None:
        return False
    registered = e.rollback_registry.get(h.handle_id)
    consumed = h.consumed or (registered is not None and registered.consumed)
    return (
        h.target_scope in e.reachable_scopes
        and h.policy_version == e.policy_version
        and h.expires_at >= e.now_ms
        and h.procedure_id in e.procedures
        and not consumed
    )


def actions_conflict(a: ControlIntent, b: ControlIntent) -> bool:
    """Conflict matrix over two intents already known to share a resource key."""
    if a.intent_type is not b.intent_type:
        return bool(set(a.target_scope) & set(b.target_scope))
    da = a.proposed_action.get("direction")
    db = b.proposed_action.get("direction")
    return da is not None and db is not None and da != db


def local_conflict(c: ControlIntent, e: ExecutorState) -> bool:
    keys = set(c.resource_keys)
    for a in e.active_intents:
        if a.intent_id != c.intent_id and keys.intersection(a.resource_keys) and actions_conflict(c, a):
            return True
    return False


# -- Stage 1 ---------------------------------------------------------------


def local_risk(c: ControlIntent, e: ExecutorState, policy: Policy = OURS_POLICY) -> float:
    if policy.risk_mode == "type_only":
        return c.phi
    if policy.risk_mode == "no_wireless":
        return combine(
            risk_inputs(c, e, use_staleness=False, use_conflict=False), e.config.weights
        )
    return combine(risk_inputs(c, e), e.config.weights)


@dataclass(frozen=True)
class TriageResult:
    stage1: Stage1
    gate_reason: GateReason
    r_local: float | None
    trace: tuple[str, ...]


def stage1_triage(
    c: ControlIntent, now: float, e: ExecutorState, policy: Policy = OURS_POLICY
) -> TriageResult:
    """Local C0 triage; branch order is fixed and recorded in the trace."""
    cfg = e.config
    trace: list[str] = []

    def done(s1: Stage1, reason: GateReason = GateReason.NONE, r: float | None = None) -> TriageResult:
        return TriageResult(s1, reason, r, tuple(trace))

    if not schema_valid(c):
        trace.append("schema:fail")
        return done(Stage1.REJECT)
    trace.append("schema:pass")
    if not valid_envelope(c, e):
        trace.append("envelope:fail")
        return done(Stage1.REJECT)
    trace.append("envelope:pass")
    if c.expires_at < now:
        trace.append("expiry:fail")
        return done(Stage1.REJECT)
    trace.append("expiry:pass")
    if policy.staleness_guard:
        if abs(e.epoch - c.state_epoch) > e.delta_epochs:
            trace.append("staleness:fail")
            return done(Stage1.REJECT)
        trace.append("staleness:pass")
    if c.reversibility_class is not ReversibilityClass.IRREVERSIBLE:
        if not valid_rollback(c.rollback_handle, e):
            trace.append("rollback:fail")
            return done(Stage1.REJECT)
        trace.append("rollback:pass")
    r = local_risk(c, e, policy)
    if r >= cfg.tau_reject:
        trace.append("reject_floor:fail")
        return done(Stage1.REJECT, r=r)
    trace.append("reject_floor:pass")
    if abs(c.risk_score - r) > cfg.eps_trust:
        trace.append("divergence:gate")
        return done(Stage1.GATE, GateReason.RISK_DIVERGENCE, r)
    trace.append("divergence:pass")
    if c.needs_upgrade:
        trace.append("upgrade:gate")
        return done(Stage1.GATE, GateReason.PLANNER_UPGRADE, r)
    trace.append("upgrade:pass")
    if local_conflict(c, e):
        trace.append("conflict:gate")
        return done(Stage1.GATE, GateReason.LOCAL_CONFLICT, r)
    trace.append("conflict:pass")
    if r <= cfg.tau_commit and not c.blocking_req:
        trace.append("risk:commit")
        return done(Stage1.COMMIT, r=r)
    if r >= cfg.tau_reject:  # unreachable after the floor; kept for fidelity
        trace.append("risk:reject")
        return done(Stage1.REJECT, r=r)
    trace.append("risk:mid")
    return done(Stage1.GATE, GateReason.MID_RISK, r)


# -- Stage 2 ---------------------------------------------------------------


@dataclass(frozen=True)
class GateResolution:
    terminal: Terminal
    degraded: bool
    degraded_entry: bool
    evidence: CoordinationEvidence | None
    quorum_outcome: Outcome | None
    trace: tuple[str, ...]


def degraded_rule(
    g: GateContext, cfg: ThresholdConfig, as_reversible: bool = False
) -> tuple[Terminal, bool, str]:
    c = g.intent
    if g.gate_reason in EVIDENCE_MANDATORY:
        return Terminal.REJECT, False, "degraded:evidence_mandatory"
    if c.blocking_req:
        return Terminal.REJECT, False, "degraded:blocking"
    reversible = as_reversible or c.reversibility_class is ReversibilityClass.REVERSIBLE
    if g.gate_reason is GateReason.MID_RISK and reversible and g.r_local <= cfg.tau_degraded:
        return Terminal.COMMIT, True, "degraded:commit"
    return Terminal.REJECT, False, "degraded:reject"


def stage2_resolve(
    g: GateContext,
    e: ExecutorState,
    services: Stage2Services,
    policy: Policy = OURS_POLICY,
) -> GateResolution:
    cfg = e.config
    c = g.intent
    trace: list[str] = []
    if not policy.force_degraded and g.d_remaining > cfg.d_min_s and g.b_available > cfg.b_min_bytes:
        trace.append("budget:ok")
        try:
            ev = services.fetch_c1(c, e)
        except C1FetchFailure:
            trace.append("c1:fetch_failure")
        else:
            q = quorum(services.votes(c, ev))
            trace.append(f"quorum:{q.outcome.value}")
            ev = dataclasses.replace(ev, verifier_votes=tuple(v.verdict.value for v in q.votes))
            if q.outcome is Outcome.APPROVED:
                if c.blocking_req:
                    trace.append("blocking:reject")
                    return GateResolution(Terminal.REJECT, False, False, ev, q.outcome, tuple(trace))
                return GateResolution(Terminal.COMMIT, False, False, ev, q.outcome, tuple(trace))
            if q.outcome is Outcome.CONFLICT:
                return GateResolution(Terminal.REJECT, False, False, ev, q.outcome, tuple(trace))
            return GateResolution(Terminal.HUMAN_GATE, False, False, ev, q.outcome, tuple(trace))
    else:
        trace.append("budget:insufficient")
    term, degraded, label = degraded_rule(g, cfg, policy.degraded_as_reversible)
    trace.append(label)
    return GateResolution(term, degraded, True, None, None, tuple(trace))


# -- composition -----------------------------------------------------------


@dataclass(frozen=True)
class RunLabels:
    seed: int = 0
    uc: str = "uc1"
    system: str = "OURS"


def remaining_deadline_s(c: ControlIntent, now_ms: float) -> float:
    return (c.expires_at - now_ms) / 1000.0


def execute_intent(
    c: ControlIntent,
    e: ExecutorState,
    services: Stage2Services,
    policy: Policy = OURS_POLICY,
    labels: RunLabels = RunLabels(),
    audit_sink: audit.AuditSink | None = None,
    audit_enabled: bool = True,
) -> DecisionRecord:
    """Stage 1, then Stage 2 on GATE against the same snapshot; commit effects last."""
    now = e.now_ms
    tri = stage1_triage(c, now, e, policy)
    trace = list(tri.trace)
    c0 = _c0_size(c)
    latency = LOCAL_TRIAGE_MS
    c1 = 0
    stage2: Terminal | None = None
    degraded = degraded_entry = fetched = False
    if tri.stage1 is Stage1.GATE:
        assert tri.r_local is not None
        g = GateContext(c, tri.gate_reason, tri.r_local, remaining_deadline_s(c, now), e.bandwidth_budget)
        res = stage2_resolve(g, e, services, policy)
        trace.extend(res.trace)
        stage2 = res.terminal
        degraded, degraded_entry = res.degraded, res.degraded_entry
        if res.evidence is not None:
            fetched = True
            c1 = len(serialize_c1(res.evidence))
            latency += services.eager_latency_ms()
        terminal = res.terminal
    else:
        terminal = Terminal(tri.stage1.value)

    if c.envelope is not None and "envelope:pass" in trace:
        e.seen_transactions.setdefault(c.envelope.transaction_id, c.envelope.idempotency_key)
    if terminal is Terminal.COMMIT:
        h = c.rollback_handle
        if h is not None and c.reversibility_class is not ReversibilityClass.IRREVERSIBLE:
            e.rollback_registry[h.handle_id] = dataclasses.replace(h, consumed=True)
        e.active_intents.append(c)
    trace.append(f"=>{terminal.value}")

    rec = DecisionRecord(
        seed=labels.seed,
        epoch=e.epoch,
        uc=labels.uc,
        system=labels.system,
        intent_id=c.intent_id,
        stage1=tri.stage1,
        gate_reason=tri.gate_reason,
        stage2=stage2,
        terminal=terminal,
        degraded=degraded,
        r_local=tri.r_local,
        bytes_charged=c0 + c1,
        latency_ms=latency,
        path_trace=tuple(trace),
        unsafe_label=None,
        audit_kind=audit.AuditKind.NONE.value,
        c1_fetched=fetched,
        degraded_entry=degraded_entry,
        decided_at_ms=now + latency,
        c0_bytes=c0,
        c1_bytes=c1,
    )
    if audit_enabled:
        rec = audit.attach(rec, c, e, audit_sink)
    return rec


def _c0_size(c: ControlIntent) -> int:
    try:
        return len(serialize_c0(c))
    except (ValueError, TypeError, AttributeError):
        # malformed payloads still cost their raw encoding on the wire
        from .contract import canonical_bytes

        try:
            return len(canonical_bytes(c.to_dict()))
        except Exception:  # noqa: BLE001
            return 0
