from __future__ import annotations

import io
import json

import pytest

from conftest import FakeServices, make_intent, make_state
from riskgate.audit import AuditKind, AuditSink, build_digest, classify
from riskgate.comparators import run_c0_only, run_ours
from riskgate.contract import ActionType, Stage1, Terminal, serialize_c2
from riskgate.metrics import accumulate
from riskgate.scenario.engine import run_system


def test_stage1_commit_gets_minimal_record():
    sink = AuditSink()
    rec = run_ours(make_intent(), make_state(), FakeServices(), sink=sink)
    assert rec.stage1 is Stage1.COMMIT
    assert rec.audit_kind == AuditKind.MINIMAL.value and rec.c2_bytes == 0
    assert sink.entries[0]["kind"] == "MINIMAL"


def test_degraded_commit_gets_full_digest():
    sink = AuditSink()
    # mid-risk reversible sleep (r = 0.15 + 0.2) with no bandwidth left for Stage 2
    st = make_state(bandwidth_budget=0.0, utilization={"cell0": (1.0, 1.0)})
    c = make_intent(ActionType.CELL_SLEEP, risk_score=0.35)
    rec = run_ours(c, st, FakeServices(), sink=sink)
    assert rec.degraded and rec.terminal is Terminal.COMMIT
    assert rec.audit_kind == AuditKind.FULL_C2.value
    assert rec.c2_bytes > 0 and rec.bytes_charged == rec.c0_bytes + rec.c2_bytes
    assert sink.entries[0]["digest"]["retention_class"] == "extended"


def test_reject_gets_minimal_record():
    sink = AuditSink()
    rec = run_ours(make_intent(expires_at=0.0), make_state(), FakeServices(), sink=sink)
    assert rec.terminal is Terminal.REJECT
    assert classify(rec) is AuditKind.MINIMAL
    assert sink.entries[0]["terminal"] == "REJECT"


def test_entries_emitted_strictly_after_decision():
    sink = AuditSink()
    run_system("OURS", "uc1", 42, 200, audit_sink=sink)
    assert sink.entries
    assert all(e["emitted_at"] > e["decided_at"] for e in sink.entries)
    with pytest.raises(ValueError):
        sink.append({"decided_at": 5.0, "emitted_at": 5.0})


@pytest.mark.parametrize("uc", ["uc1", "uc2"])
def test_disabling_audit_changes_no_decision(uc):
    on = run_system("OURS", uc, 45, 400, audit_enabled=True)
    off = run_system("OURS", uc, 45, 400, audit_enabled=False)
    assert [r.decision for r in on.records] == [r.decision for r in off.records]
    assert on.kpis == off.kpis
    assert all(r.audit_kind == "NONE" for r in off.records)


def test_audit_log_replays_decisions():
    buf = io.StringIO()
    sink = AuditSink(buf)
    res = run_system("OURS", "uc2", 46, 300, audit_sink=sink)
    lines = [json.loads(x) for x in buf.getvalue().splitlines()]
    assert len(lines) == len(res.records)
    for entry, rec in zip(lines, res.records):
        assert entry["intent"] == rec.intent_id and entry["terminal"] == rec.terminal.value
        assert (entry["kind"] == "FULL_C2") == (rec.audit_kind == "FULL_C2")
    replay = run_system("OURS", "uc2", 46, 300, audit_enabled=False)
    assert [e["terminal"] for e in lines] == [r.terminal.value for r in replay.records]


def test_digest_is_reproducible():
    c = make_intent()
    rec = run_ours(c, make_state(), FakeServices())
    assert serialize_c2(build_digest(rec, c, "pv1")) == serialize_c2(build_digest(rec, c, "pv1"))


def test_c0_only_has_no_full_coverage():
    m = accumulate(run_system("C0_ONLY", "uc1", 42, 300).records)
    assert m.full_c2_coverage == 0.0
    rec = run_c0_only(make_intent(), make_state())
    assert rec.audit_kind == AuditKind.MINIMAL.value
