from __future__ import annotations

import dataclasses
from typing import Sequence

import pytest

from riskgate.contract import (
    CATALOG,
    ActionType,
    ConstraintRecord,
    ControlIntent,
    CoordinationEvidence,
    ReversibilityClass,
    RollbackHandle,
    TransactionEnvelope,
    default_thresholds,
)
from riskgate.executor import ExecutorState
from riskgate.verifiers import Verdict, Vote

EPOCH = 100
NOW_MS = EPOCH * 10_000.0


def make_state(uc: str = "uc1", **kw) -> ExecutorState:
    th = kw.pop("config", default_thresholds(uc))
    epoch_s = 10.0 if uc == "uc1" else 5.0
    base = dict(
        config=th,
        epoch=EPOCH,
        now_ms=NOW_MS,
        epoch_s=epoch_s,
        uc_max=4 if uc == "uc1" else 6,
        verifier_set=("v0", "v1"),
        policy_version="pv1",
        reachable_scopes=frozenset({"cell0", "cell1", "cell2"}),
        procedures=frozenset({"p0"}),
        bandwidth_budget=10_000.0,
    )
    base.update(kw)
    return ExecutorState(**base)


def make_handle(**kw) -> RollbackHandle:
    base = dict(handle_id="h0", target_scope="cell0", policy_version="pv1",
                expires_at=NOW_MS + 600_000, procedure_id="p0")
    base.update(kw)
    return RollbackHandle(**base)


def make_intent(t: ActionType = ActionType.CELL_WAKE, **kw) -> ControlIntent:
    rev = CATALOG[t][0]
    base = dict(
        intent_id="i0",
        intent_type=t,
        proposed_action={"direction": "up"},
        target_scope=("cell0",),
        resource_keys=("cell0",),
        state_epoch=EPOCH,
        expires_at=NOW_MS + 20_000.0,
        reversibility_class=rev,
        risk_score=CATALOG[t][1].phi * 0.3,
        rollback_handle=None if rev is ReversibilityClass.IRREVERSIBLE else make_handle(),
    )
    base.update(kw)
    return ControlIntent(**base)


def make_evidence(n_constraints: int = 1, n_conflicts: int = 0) -> CoordinationEvidence:
    return CoordinationEvidence(
        intent_id="i0",
        constraint_summary=tuple(
            ConstraintRecord(f"cell{i}", "load", 0.9, 0.5) for i in range(n_constraints)
        ),
        conflict_candidates=tuple(f"i{1000 + k}" for k in range(n_conflicts)),
        snapshot_epoch=EPOCH,
        evidence_uri="ev://uc1/0/i0",
    )


class FakeServices:
    """Stage-2 capability stub with fixed votes and latency."""

    def __init__(self, verdicts: Sequence[Verdict] = (Verdict.APPROVE, Verdict.APPROVE), latency: float = 1500.0):
        self.verdicts = list(verdicts)
        self.latency = latency
        self.fetches = 0

    def fetch_c1(self, c, state):
        self.fetches += 1
        return dataclasses.replace(make_evidence(), intent_id=c.intent_id)

    def votes(self, c, evidence):
        return [Vote(v, f"v{i}") for i, v in enumerate(self.verdicts)]

    def eager_latency_ms(self) -> float:
        return self.latency


@pytest.fixture
def state() -> ExecutorState:
    return make_state()


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import REPORT

    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
