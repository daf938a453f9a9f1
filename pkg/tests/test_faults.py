from __future__ import annotations

import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import EPOCH, NOW_MS, make_intent
from riskgate.contract import ActionType, ReversibilityClass, TransactionEnvelope
from riskgate.faults import (
    AXES,
    CandidateIntent,
    FaultPlan,
    InjectionContext,
    coarse_grid,
    dense_slices,
    inject,
    load_slices,
    synthetic_conflict,
)
from riskgate.risk import overlapping

CTX = InjectionContext(seed=42, epoch=EPOCH, now_ms=NOW_MS, delta_epochs=3, d_min_s=5.0, eps_trust=0.15)


def _cand(**kw) -> CandidateIntent:
    env = TransactionEnvelope("t0", EPOCH, NOW_MS + 60_000, "k0", ("cell0",))
    c = make_intent(ActionType.CELL_SLEEP, envelope=env, risk_score=0.3, **kw)
    return CandidateIntent(intent=c, action=None, would_be_safe=True, gap=0)


def _ctx(epoch: int) -> InjectionContext:
    return dataclasses.replace(CTX, epoch=epoch)


def test_zero_plan_leaves_candidate_untouched():
    cand = _cand()
    assert inject(FaultPlan(), cand, CTX) is cand


@pytest.mark.parametrize("epoch", range(100, 140))
def test_stale_injection_exceeds_tolerance(epoch):
    out = inject(FaultPlan(stale_prob=1.0), _cand(state_epoch=epoch), _ctx(epoch))
    assert out.gap > CTX.delta_epochs
    assert epoch - out.intent.state_epoch == out.gap
    assert out.intent.envelope.state_epoch == out.intent.state_epoch
    assert "stale" in out.injected_faults


def test_conflict_injection_overlaps_keys():
    cand = _cand()
    out = inject(FaultPlan(conflict_prob=1.0), cand, CTX)
    assert len(out.synthetic_conflicts) == 1
    assert overlapping(out.intent, out.synthetic_conflicts)
    assert out.intent == cand.intent


def test_synthetic_conflict_differs_in_type():
    c = make_intent(ActionType.CELL_SLEEP)
    x = synthetic_conflict(c, "a")
    assert x.intent_type is not c.intent_type
    assert x.reversibility_class is not ReversibilityClass.IRREVERSIBLE
    assert x.resource_keys == c.resource_keys[:1]


def test_deadline_squeeze_lands_below_d_min():
    for e in range(50):
        out = inject(FaultPlan(deadline_squeeze_prob=1.0), _cand(), _ctx(e))
        remaining = (out.intent.expires_at - NOW_MS) / 1000.0
        assert 0 < remaining < CTX.d_min_s


def test_risk_divergence_exceeds_trust_margin():
    for e in range(50):
        cand = _cand()
        out = inject(FaultPlan(risk_divergence_prob=1.0), cand, _ctx(e))
        assert abs(out.intent.risk_score - cand.intent.risk_score) > CTX.eps_trust


def test_verifier_fault_picks_a_verifier():
    out = inject(FaultPlan(verifier_fault_prob=1.0), _cand(), CTX)
    assert out.flip_verifier in range(CTX.n_verifiers)


def test_rollback_corruption_invalidates_handle():
    for e in range(20):
        out = inject(FaultPlan(rollback_corruption_prob=1.0), _cand(), _ctx(e))
        h = out.intent.rollback_handle
        assert h.consumed or h.expires_at < NOW_MS


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(AXES), st.sampled_from(AXES))
def test_axes_draw_independently(epoch, a, b):
    """Turning a second axis on never changes whether the first one fires."""
    if a == b:
        return
    one = inject(FaultPlan(**{f"{a}_prob": 0.5}), _cand(), _ctx(epoch))
    both = inject(FaultPlan(**{f"{a}_prob": 0.5, f"{b}_prob": 0.5}), _cand(), _ctx(epoch))
    assert (a in one.injected_faults) == (a in both.injected_faults)


def test_plan_rejects_bad_probability():
    with pytest.raises(ValueError):
        FaultPlan(stale_prob=1.5)


def test_slice_presets():
    s = load_slices()
    assert {"benign", "stale_campaign", "risk_p30", "conflict_high", "composite_severe"} <= set(s)
    assert s["stale_campaign"].faults.stale_prob == 1.0
    assert s["risk_p30"].faults.risk_divergence_prob == 0.3
    assert [d.name for d in dense_slices()] == ["benign", "risk_p30", "conflict_high", "composite_severe"]


def test_coarse_grid_has_22_slices():
    g = coarse_grid()
    assert len(g) == 22
    assert g[0].name == "benign"
    assert len({x.name for x in g}) == 22
