"""Random intent/state generator and the P1-P4 checks shared by the invariant
tests and the acceptance suite.

The checks restate each property from the contract directly, without calling
back into the triage code they are checking.
"""
from __future__ import annotations

import dataclasses
import random
from dataclasses import dataclass

from riskgate.contract import (
    CATALOG,
    UC1_ACTIONS,
    UC2_ACTIONS,
    ControlIntent,
    CoordinationEvidence,
    GateReason,
    ReversibilityClass,
    RollbackHandle,
    Terminal,
    TransactionEnvelope,
    default_thresholds,
)
from riskgate.executor import OURS_POLICY, DecisionRecord, ExecutorState, Policy, execute_intent
from riskgate.verifiers import Verdict, Vote

EVIDENCE_MANDATORY = {GateReason.RISK_DIVERGENCE, GateReason.LOCAL_CONFLICT, GateReason.PLANNER_UPGRADE}
SCOPES = ("o0", "o1", "o2", "o3")
EPOCH_S = {"uc1": 10.0, "uc2": 5.0}
UC_MAX = {"uc1": 4, "uc2": 6}


class ScriptedServices:
    def __init__(self, verdicts: list[Verdict], latency: float) -> None:
        self.verdicts = verdicts
        self.latency = latency

    def fetch_c1(self, c, state):
        return CoordinationEvidence(c.intent_id, (), (), (), state.epoch, "ev://fuzz")

    def votes(self, c, evidence):
        return [Vote(v, f"v{i}") for i, v in enumerate(self.verdicts)]

    def eager_latency_ms(self) -> float:
        return self.latency


@dataclass(frozen=True)
class Case:
    intent: ControlIntent
    state: ExecutorState
    services: ScriptedServices
    gap: int
    rollback_ok: bool  # evaluated independently before the run
    d_s: float
    b: float


def _handle(rng: random.Random, scope: str, now: float) -> RollbackHandle | None:
    kind = rng.random()
    h = RollbackHandle(f"h{rng.randrange(10**9)}", scope, "pv1", now + 60_000.0, "p0")
    if kind < 0.55:
        return h
    if kind < 0.65:
        return None
    if kind < 0.73:
        return dataclasses.replace(h, consumed=True)
    if kind < 0.81:
        return dataclasses.replace(h, expires_at=now - 1.0)
    if kind < 0.88:
        return dataclasses.replace(h, target_scope="elsewhere")
    if kind < 0.94:
        return dataclasses.replace(h, procedure_id="unknown")
    return dataclasses.replace(h, policy_version="pv0")


def _handle_ok(h: RollbackHandle | None, now: float, registry: dict) -> bool:
    if h is None or h.consumed:
        return False
    reg = registry.get(h.handle_id)
    return (
        (reg is None or not reg.consumed)
        and h.target_scope in SCOPES
        and h.policy_version == "pv1"
        and h.expires_at >= now
        and h.procedure_id == "p0"
    )


def random_case(rng: random.Random, uc: str) -> Case:
    th = default_thresholds(uc)
    epoch_s = EPOCH_S[uc]
    epoch = rng.randrange(50, 10_000)
    now = epoch * epoch_s * 1000.0
    delta = max(1, -int(-th.delta_staleness_s // epoch_s))
    gap = rng.choice([0, 0, 0, 1, delta - 1, delta, delta + 1, delta + 2, rng.randrange(0, 3 * delta + 3)])
    gap = max(gap, 0)
    t = rng.choice(UC1_ACTIONS if uc == "uc1" else UC2_ACTIONS)
    rev, rclass = CATALOG[t]
    scope = tuple(rng.sample(SCOPES, rng.randint(1, 3)))
    d_s = rng.choice([rng.uniform(-5, 0), rng.uniform(0, th.d_min_s), th.d_min_s, rng.uniform(th.d_min_s, 90)])
    handle = None if rev is ReversibilityClass.IRREVERSIBLE and rng.random() < 0.7 else _handle(rng, scope[0], now)
    registry = {}
    if handle is not None and rng.random() < 0.05:
        registry[handle.handle_id] = dataclasses.replace(handle, consumed=True)
    env = None
    if rng.random() < 0.5:
        env = TransactionEnvelope(
            f"t{epoch}", epoch - gap, now + 1000.0 * (d_s + 30), f"k{epoch}", scope
        )
    intent = ControlIntent(
        intent_id=f"i{epoch}",
        intent_type=t,
        proposed_action={"direction": rng.choice(["up", "down"])},
        target_scope=scope,
        resource_keys=scope[: rng.randint(1, len(scope))],
        state_epoch=epoch - gap,
        expires_at=now + 1000.0 * d_s,
        reversibility_class=rev,
        risk_score=round(min(max(rclass.phi * 0.3 + rng.gauss(0, 0.15), 0.0), 1.0), 4),
        rollback_handle=handle,
        needs_upgrade=rng.random() < 0.2,
        blocking_req=frozenset({"w"}) if rng.random() < 0.1 else frozenset(),
        envelope=env,
    )
    active = []
    for k in range(rng.choice([0, 0, 1, 2, 4])):
        other = rng.choice(UC1_ACTIONS if uc == "uc1" else UC2_ACTIONS)
        active.append(
            ControlIntent(
                f"a{k}", other, {"direction": rng.choice(["up", "down"])}, (rng.choice(SCOPES),),
                (rng.choice(SCOPES),), epoch, now + 1e6, CATALOG[other][0], 0.3,
            )
        )
    b = rng.choice([0.0, th.b_min_bytes, rng.uniform(0, th.b_min_bytes), rng.uniform(th.b_min_bytes, 20_000)])
    state = ExecutorState(
        config=th,
        epoch=epoch,
        now_ms=now,
        epoch_s=epoch_s,
        uc_max=UC_MAX[uc],
        active_intents=active,
        rollback_registry=registry,
        utilization={s: (rng.uniform(0, 1.3), 1.0) for s in SCOPES},
        bandwidth_budget=b,
        verifier_set=("v0", "v1"),
        policy_version="pv1",
        reachable_scopes=frozenset(SCOPES),
        procedures=frozenset({"p0"}),
    )
    verdicts = [rng.choice([Verdict.APPROVE, Verdict.APPROVE, Verdict.VETO, Verdict.ABSTAIN]) for _ in range(2)]
    return Case(
        intent, state, ScriptedServices(verdicts, rng.uniform(500, 4000)), gap,
        _handle_ok(handle, now, registry), d_s, b,
    )


def violations(case: Case, policy: Policy = OURS_POLICY) -> tuple[DecisionRecord, list[str]]:
    """Run one case; returns the record and the names of the properties it breaks."""
    c, e = case.intent, case.state
    th = e.config
    delta = e.delta_epochs
    rec = execute_intent(c, e, case.services, policy, audit_enabled=False)
    out = []
    commit = rec.terminal is Terminal.COMMIT
    if case.gap > delta and commit:
        out.append("P1")
    if c.reversibility_class is not ReversibilityClass.IRREVERSIBLE and not case.rollback_ok and commit:
        out.append("P2")
    if rec.gate_reason in EVIDENCE_MANDATORY:
        ample = case.d_s > th.d_min_s and case.b > th.b_min_bytes
        approved = all(v is Verdict.APPROVE for v in case.services.verdicts)
        if commit and not (ample and approved and not c.blocking_req):
            out.append("P3")
        if not ample and rec.terminal is not Terminal.REJECT:
            out.append("P3")
    if rec.degraded:
        squeezed = case.d_s <= th.d_min_s or case.b <= th.b_min_bytes
        ok = (
            squeezed
            and rec.gate_reason is GateReason.MID_RISK
            and c.reversibility_class is ReversibilityClass.REVERSIBLE
            and rec.r_local is not None
            and rec.r_local <= th.tau_degraded
            and not c.blocking_req
        )
        if not ok:
            out.append("P4")
    return rec, out


def fuzz(uc: str, n: int, seed: int = 0) -> tuple[dict[str, int], dict[str, int]]:
    """Returns (violation counts, coverage counts) over n random cases."""
    rng = random.Random(f"{uc}:{seed}")
    bad = {"P1": 0, "P2": 0, "P3": 0, "P4": 0}
    seen = {"stale": 0, "bad_handle": 0, "mandatory_gate": 0, "degraded": 0, "commit": 0}
    for _ in range(n):
        case = random_case(rng, uc)
        rec, broken = violations(case)
        for p in broken:
            bad[p] += 1
        seen["stale"] += case.gap > case.state.delta_epochs
        seen["bad_handle"] += not case.rollback_ok
        seen["mandatory_gate"] += rec.gate_reason in EVIDENCE_MANDATORY
        seen["degraded"] += rec.degraded
        seen["commit"] += rec.terminal is Terminal.COMMIT
    return bad, seen
