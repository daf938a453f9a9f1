from __future__ import annotations

import dataclasses
import json

import pytest
from hypothesis import given, strategies as st

from conftest import make_evidence, make_intent
from riskgate.contract import (
    CATALOG,
    UC1_ACTIONS,
    UC2_ACTIONS,
    ActionType,
    ConfigError,
    Decision,
    GateReason,
    ReversibilityClass,
    RiskClass,
    Stage1,
    Terminal,
    ThresholdConfig,
    catalog_lookup,
    default_thresholds,
    load_thresholds,
    phi,
    serialize_c0,
    serialize_c1,
)


def test_catalog_examples():
    assert catalog_lookup(ActionType.CELL_SLEEP) == (ReversibilityClass.REVERSIBLE, RiskClass.MED)
    assert catalog_lookup(ActionType.SLA_ESCALATE) == (ReversibilityClass.IRREVERSIBLE, RiskClass.LOW)
    assert catalog_lookup(ActionType.SLICE_RESOURCE_REALLOC) == (
        ReversibilityClass.COSTLY_REVERSIBLE,
        RiskClass.HIGH,
    )


def test_catalog_totality_and_partition():
    assert set(CATALOG) == set(ActionType)
    assert set(UC1_ACTIONS) | set(UC2_ACTIONS) == set(ActionType)
    assert not set(UC1_ACTIONS) & set(UC2_ACTIONS)
    irreversible = [t for t, (rev, _) in CATALOG.items() if rev is ReversibilityClass.IRREVERSIBLE]
    assert irreversible == [ActionType.SLA_ESCALATE]


def test_catalog_is_read_only():
    with pytest.raises(TypeError):
        CATALOG[ActionType.CELL_SLEEP] = (ReversibilityClass.IRREVERSIBLE, RiskClass.HIGH)  # type: ignore[index]


def test_phi_values_exact():
    assert RiskClass.LOW.phi == 0.2
    assert RiskClass.MED.phi == 0.5
    assert RiskClass.HIGH.phi == 0.8
    table = {
        "CELL_SLEEP": 0.5, "CELL_WAKE": 0.2, "RF_POWER_REDUCE": 0.2, "RF_RECONFIG": 0.8,
        "LOAD_REDIRECT": 0.5, "SLICE_PRIORITY_BOOST": 0.2, "SLICE_ADMISSION_RESTRICT": 0.5,
        "SLICE_RESOURCE_REALLOC": 0.8, "LOAD_BALANCE_UPDATE": 0.5, "SLA_ESCALATE": 0.2,
    }
    assert {t.value: phi(t) for t in ActionType} == table


@pytest.mark.parametrize("t", list(ActionType))
def test_catalog_lookup_accepts_string(t):
    assert catalog_lookup(t.value) == CATALOG[t]


# -- thresholds ------------------------------------------------------------


def test_uc_defaults():
    a, b = default_thresholds("uc1"), default_thresholds("uc2")
    assert (a.tau_commit, a.tau_reject, a.tau_degraded, a.delta_staleness_s, a.d_min_s, a.b_min_bytes, a.eps_trust) == (
        0.30, 0.80, 0.50, 30.0, 5.0, 2048.0, 0.15)
    assert (b.tau_commit, b.tau_reject, b.tau_degraded, b.delta_staleness_s, b.d_min_s, b.b_min_bytes, b.eps_trust) == (
        0.25, 0.75, 0.40, 10.0, 2.0, 1024.0, 0.15)
    assert a.weights == b.weights == (0.3, 0.3, 0.2, 0.2)


@pytest.mark.parametrize(
    "override",
    [
        {"tau_commit": 0.6},
        {"tau_degraded": 0.9},
        {"tau_commit": 0.5},
        {"weights": [0.5, 0.5, 0.5, 0.5]},
        {"weights": [1.0, 0.0, 0.0]},
        {"eps_trust": 1.5},
        {"delta_staleness_s": 0},
    ],
)
def test_bad_thresholds_rejected(override):
    d = default_thresholds("uc1").to_dict()
    d.update(override)
    with pytest.raises(ConfigError):
        ThresholdConfig.from_dict(d)


def test_missing_threshold_key(tmp_path):
    d = default_thresholds("uc2").to_dict()
    del d["eps_trust"]
    p = tmp_path / "th.json"
    p.write_text(json.dumps(d))
    with pytest.raises(ConfigError, match="eps_trust"):
        load_thresholds(p)


def test_threshold_round_trip(tmp_path):
    th = default_thresholds("uc1")
    p = tmp_path / "th.json"
    p.write_text(json.dumps(th.to_dict()))
    assert load_thresholds(p) == th


# -- decision output contract ------------------------------------------------


def test_decision_contract():
    Decision(Stage1.COMMIT, GateReason.NONE, None, Terminal.COMMIT)
    Decision(Stage1.GATE, GateReason.MID_RISK, Terminal.COMMIT, Terminal.COMMIT, degraded=True)
    with pytest.raises(ValueError):
        Decision(Stage1.COMMIT, GateReason.MID_RISK, None, Terminal.COMMIT)
    with pytest.raises(ValueError):
        Decision(Stage1.GATE, GateReason.NONE, Terminal.REJECT, Terminal.REJECT)
    with pytest.raises(ValueError):
        Decision(Stage1.GATE, GateReason.MID_RISK, None, Terminal.REJECT)
    with pytest.raises(ValueError):
        Decision(Stage1.GATE, GateReason.MID_RISK, Terminal.REJECT, Terminal.REJECT, degraded=True)


# -- canonical encoding ----------------------------------------------------


def test_c0_minimal_intent_reaches_floor():
    c = make_intent(ActionType.CELL_WAKE, proposed_action={}, rollback_handle=None,
                    reversibility_class=ReversibilityClass.REVERSIBLE)
    assert len(serialize_c0(c)) >= 200


def test_c0_eight_keys_under_ceiling():
    c = make_intent(ActionType.RF_RECONFIG, resource_keys=tuple(f"cell{i}" for i in range(8)),
                    target_scope=tuple(f"cell{i}" for i in range(3)))
    assert len(serialize_c0(c)) <= 400


def test_c1_sizes():
    assert len(serialize_c1(make_evidence(1, 0))) >= 400
    assert len(serialize_c1(make_evidence(3, 10))) <= 800


def test_serialization_is_deterministic():
    c = make_intent()
    assert serialize_c0(c) == serialize_c0(dataclasses.replace(c))
    e = make_evidence(2, 3)
    assert serialize_c1(e) == serialize_c1(dataclasses.replace(e))


@given(
    t=st.sampled_from(list(ActionType)),
    risk=st.floats(0, 1),
    n_keys=st.integers(1, 8),
    epoch=st.integers(0, 10**6),
    upgrade=st.booleans(),
    blocking=st.frozensets(st.sampled_from(["maint-window", "x"]), max_size=2),
)
def test_c0_encoding_window_and_determinism(t, risk, n_keys, epoch, upgrade, blocking):
    c = make_intent(
        t,
        risk_score=risk,
        resource_keys=tuple(f"cell{i}" for i in range(n_keys)),
        state_epoch=epoch,
        needs_upgrade=upgrade,
        blocking_req=blocking,
    )
    a, b = serialize_c0(c), serialize_c0(c)
    assert a == b
    assert 200 <= len(a) <= 400
