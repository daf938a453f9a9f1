"""System pipelines compared in the evaluation. Each one is a thin wrapper
over the executor with different decision logic or cost accounting."""
from __future__ import annotations

import dataclasses
from enum import Enum
from typing import Callable

from . import audit
from .contract import ControlIntent, GateReason, ReversibilityClass, Stage1, Terminal, serialize_c1
from .executor import (
    LOCAL_TRIAGE_MS,
    OURS_POLICY,
    DecisionRecord,
    ExecutorState,
    Policy,
    RunLabels,
    Stage2Services,
    _c0_size,
    execute_intent,
    schema_valid,
)
from .risk import compute_risk

BL4_THRESHOLD = 0.45


class SystemVariant(str, Enum):
    OURS = "OURS"
    FB_INV = "FB_INV"
    ST_INV = "ST_INV"
    BL4_LEGACY = "BL4_LEGACY"
    C0_ONLY = "C0_ONLY"
    AB1_NO_C1 = "AB1_NO_C1"
    AB2_NO_WIRELESS = "AB2_NO_WIRELESS"


MAIN_SYSTEMS = (
    SystemVariant.OURS,
    SystemVariant.FB_INV,
    SystemVariant.ST_INV,
    SystemVariant.BL4_LEGACY,
    SystemVariant.C0_ONLY,
)

ST_POLICY = Policy("ST_INV", risk_mode="type_only")
AB1_POLICY = Policy("AB1_NO_C1", force_degraded=True)
AB2_POLICY = Policy(
    "AB2_NO_WIRELESS", risk_mode="no_wireless", staleness_guard=False, degraded_as_reversible=True
)

Runner = Callable[..., DecisionRecord]


def _labels(labels: RunLabels, system: SystemVariant) -> RunLabels:
    return dataclasses.replace(labels, system=system.value)


def run_ours(c, state, services, labels=RunLabels(), sink=None, audit_enabled=True) -> DecisionRecord:
    return execute_intent(
        c, state, services, OURS_POLICY, _labels(labels, SystemVariant.OURS), sink, audit_enabled
    )


def run_fb_inv(c, state, services, labels=RunLabels(), sink=None, audit_enabled=True) -> DecisionRecord:
    """OURS decisions verbatim; every intent pays C0+C1+C2 and the eager latency."""
    c1_full = len(serialize_c1(services.fetch_c1(c, state)))
    rec = execute_intent(
        c, state, services, OURS_POLICY, _labels(labels, SystemVariant.FB_INV), None, audit_enabled=False
    )
    latency = LOCAL_TRIAGE_MS + services.eager_latency_ms()
    rec = dataclasses.replace(rec, decided_at_ms=state.now_ms + latency)
    c2_full = audit.digest_size(rec, c, state.policy_version)
    kind = audit.AuditKind.NONE
    if audit_enabled:
        kind = audit.AuditKind.FULL_C2
        if sink is not None:
            d = audit.build_digest(rec, c, state.policy_version)
            sink.append(dict(audit.minimal_record(rec), kind=kind.value, digest=d.to_dict()))
    return dataclasses.replace(
        rec,
        bytes_charged=rec.c0_bytes + c1_full + (c2_full if audit_enabled else 0),
        latency_ms=latency,
        c1_fetched=True,
        c1_bytes=c1_full,
        c2_bytes=c2_full if audit_enabled else 0,
        audit_kind=kind.value,
    )


def run_st_inv(c, state, services, labels=RunLabels(), sink=None, audit_enabled=True) -> DecisionRecord:
    return execute_intent(
        c, state, services, ST_POLICY, _labels(labels, SystemVariant.ST_INV), sink, audit_enabled
    )


def run_ab1(c, state, services, labels=RunLabels(), sink=None, audit_enabled=True) -> DecisionRecord:
    return execute_intent(
        c, state, services, AB1_POLICY, _labels(labels, SystemVariant.AB1_NO_C1), sink, audit_enabled
    )


def run_ab2(c, state, services, labels=RunLabels(), sink=None, audit_enabled=True) -> DecisionRecord:
    return execute_intent(
        c, state, services, AB2_POLICY, _labels(labels, SystemVariant.AB2_NO_WIRELESS), sink, audit_enabled
    )


def _stage1_only(
    c: ControlIntent,
    state: ExecutorState,
    labels: RunLabels,
    commit_rule: Callable[[ControlIntent, ExecutorState], tuple[bool, float | None, str]],
    sink: audit.AuditSink | None,
    audit_enabled: bool,
) -> DecisionRecord:
    trace: list[str] = []
    r: float | None = None
    if not schema_valid(c):
        trace.append("schema:fail")
        commit = False
    else:
        trace.append("schema:pass")
        if c.expires_at < state.now_ms:
            trace.append("expiry:fail")
            commit = False
        else:
            trace.append("expiry:pass")
            commit, r, label = commit_rule(c, state)
            trace.append(label)
    terminal = Terminal.COMMIT if commit else Terminal.REJECT
    if commit:
        h = c.rollback_handle
        if h is not None and c.reversibility_class is not ReversibilityClass.IRREVERSIBLE:
            state.rollback_registry[h.handle_id] = dataclasses.replace(h, consumed=True)
        state.active_intents.append(c)
    trace.append(f"=>{terminal.value}")
    c0 = _c0_size(c)
    rec = DecisionRecord(
        seed=labels.seed,
        epoch=state.epoch,
        uc=labels.uc,
        system=labels.system,
        intent_id=c.intent_id,
        stage1=Stage1(terminal.value),
        gate_reason=GateReason.NONE,
        stage2=None,
        terminal=terminal,
        degraded=False,
        r_local=r,
        bytes_charged=c0,
        latency_ms=LOCAL_TRIAGE_MS,
        path_trace=tuple(trace),
        unsafe_label=None,
        audit_kind=audit.AuditKind.NONE.value,
        decided_at_ms=state.now_ms + LOCAL_TRIAGE_MS,
        c0_bytes=c0,
    )
    if audit_enabled:
        rec = audit.attach(rec, c, state, sink)
    return rec


def _bl4_rule(c: ControlIntent, state: ExecutorState) -> tuple[bool, float, str]:
    r = compute_risk(c, state)
    return r < BL4_THRESHOLD, r, "bl4_threshold:commit" if r < BL4_THRESHOLD else "bl4_threshold:reject"


def run_bl4(c, state, services=None, labels=RunLabels(), sink=None, audit_enabled=True) -> DecisionRecord:
    """Schema and expiry only, then a single fixed threshold on the local risk."""
    return _stage1_only(c, state, _labels(labels, SystemVariant.BL4_LEGACY), _bl4_rule, sink, audit_enabled)


def run_c0_only(c, state, services=None, labels=RunLabels(), sink=None, audit_enabled=True) -> DecisionRecord:
    """Schema and expiry only, then commit."""
    return _stage1_only(
        c, state, _labels(labels, SystemVariant.C0_ONLY), lambda c, s: (True, None, "c0:commit"), sink, audit_enabled
    )


RUNNERS: dict[SystemVariant, Runner] = {
    SystemVariant.OURS: run_ours,
    SystemVariant.FB_INV: run_fb_inv,
    SystemVariant.ST_INV: run_st_inv,
    SystemVariant.BL4_LEGACY: run_bl4,
    SystemVariant.C0_ONLY: run_c0_only,
    SystemVariant.AB1_NO_C1: run_ab1,
    SystemVariant.AB2_NO_WIRELESS: run_ab2,
}


def parse_systems(text: str) -> list[SystemVariant]:
    out = []
    for tok in text.split(","):
        tok = tok.strip().upper().replace("-", "_")
        if tok:
            out.append(SystemVariant(tok))
    return out
