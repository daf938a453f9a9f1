"""Contract-level domain types: C0 intent, envelope, C1 evidence, C2 digest,
the typed action catalog and threshold configuration.

All records are frozen after construction. Canonical byte encoding is
key-sorted compact JSON; it is the ground truth for byte accounting.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Any, Mapping


class ActionType(str, Enum):
    # UC1: energy-saving policy push
    CELL_SLEEP = "CELL_SLEEP"
    CELL_WAKE = "CELL_WAKE"
    RF_POWER_REDUCE = "RF_POWER_REDUCE"
    RF_RECONFIG = "RF_RECONFIG"
    LOAD_REDIRECT = "LOAD_REDIRECT"
    # UC2: slice-SLA protection
    SLICE_PRIORITY_BOOST = "SLICE_PRIORITY_BOOST"
    SLICE_ADMISSION_RESTRICT = "SLICE_ADMISSION_RESTRICT"
    SLICE_RESOURCE_REALLOC = "SLICE_RESOURCE_REALLOC"
    LOAD_BALANCE_UPDATE = "LOAD_BALANCE_UPDATE"
    SLA_ESCALATE = "SLA_ESCALATE"


class ReversibilityClass(str, Enum):
    REVERSIBLE = "reversible"
    COSTLY_REVERSIBLE = "costly_reversible"
    IRREVERSIBLE = "irreversible"


class RiskClass(str, Enum):
    LOW = "low"
    MED = "med"
    HIGH = "high"

    @property
    def phi(self) -> float:
        return _PHI[self]


_PHI = MappingProxyType({RiskClass.LOW: 0.2, RiskClass.MED: 0.5, RiskClass.HIGH: 0.8})

_REV_CODE = MappingProxyType(
    {
        ReversibilityClass.REVERSIBLE: "R",
        ReversibilityClass.COSTLY_REVERSIBLE: "CR",
        ReversibilityClass.IRREVERSIBLE: "IR",
    }
)

_R, _CR, _IR = (
    ReversibilityClass.REVERSIBLE,
    ReversibilityClass.COSTLY_REVERSIBLE,
    ReversibilityClass.IRREVERSIBLE,
)

CATALOG: Mapping[ActionType, tuple[ReversibilityClass, RiskClass]] = MappingProxyType(
    {
        ActionType.CELL_SLEEP: (_R, RiskClass.MED),
        ActionType.CELL_WAKE: (_R, RiskClass.LOW),
        ActionType.RF_POWER_REDUCE: (_R, RiskClass.LOW),
        ActionType.RF_RECONFIG: (_CR, RiskClass.HIGH),
        ActionType.LOAD_REDIRECT: (_R, RiskClass.MED),
        ActionType.SLICE_PRIORITY_BOOST: (_R, RiskClass.LOW),
        ActionType.SLICE_ADMISSION_RESTRICT: (_CR, RiskClass.MED),
        ActionType.SLICE_RESOURCE_REALLOC: (_CR, RiskClass.HIGH),
        ActionType.LOAD_BALANCE_UPDATE: (_R, RiskClass.MED),
        ActionType.SLA_ESCALATE: (_IR, RiskClass.LOW),
    }
)

UC1_ACTIONS: tuple[ActionType, ...] = (
    ActionType.CELL_SLEEP,
    ActionType.CELL_WAKE,
    ActionType.RF_POWER_REDUCE,
    ActionType.RF_RECONFIG,
    ActionType.LOAD_REDIRECT,
)
UC2_ACTIONS: tuple[ActionType, ...] = (
    ActionType.SLICE_PRIORITY_BOOST,
    ActionType.SLICE_ADMISSION_RESTRICT,
    ActionType.SLICE_RESOURCE_REALLOC,
    ActionType.LOAD_BALANCE_UPDATE,
    ActionType.SLA_ESCALATE,
)


def catalog_lookup(t: ActionType) -> tuple[ReversibilityClass, RiskClass]:
    return CATALOG[ActionType(t)]


def phi(t: ActionType) -> float:
    return CATALOG[t][1].phi


# -- records ---------------------------------------------------------------


@dataclass(frozen=True)
class TransactionEnvelope:
    transaction_id: str
    state_epoch: int
    expires_at: float  # absolute, ms
    idempotency_key: str
    visibility_scope: tuple[str, ...] = ()
    sender_role: str = "pl"
    receiver_role: str = "ex"
    policy_digest: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "tx": self.transaction_id,
            "ep": self.state_epoch,
            "x": _ms(self.expires_at),
            "ik": self.idempotency_key,
            "vs": list(self.visibility_scope),
            "sr": self.sender_role,
            "rr": self.receiver_role,
            "pd": self.policy_digest,
        }


@dataclass(frozen=True)
class RollbackHandle:
    handle_id: str
    target_scope: str
    policy_version: str
    expires_at: float  # absolute, ms
    procedure_id: str
    consumed: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.handle_id,
            "sc": self.target_scope,
            "pv": self.policy_version,
            "x": _ms(self.expires_at),
            "pr": self.procedure_id,
            "u": self.consumed,
        }


@dataclass(frozen=True)
class ControlIntent:
    """The C0 payload: everything local triage needs, nothing more."""

    intent_id: str
    intent_type: ActionType
    proposed_action: Mapping[str, Any]
    target_scope: tuple[str, ...]
    resource_keys: tuple[str, ...]
    state_epoch: int
    expires_at: float  # absolute, ms
    reversibility_class: ReversibilityClass
    risk_score: float
    rollback_handle: RollbackHandle | None = None
    needs_upgrade: bool = False
    blocking_req: frozenset[str] = frozenset()
    envelope: TransactionEnvelope | None = None

    @property
    def phi(self) -> float:
        return phi(self.intent_type)

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.intent_id,
            "t": self.intent_type.value,
            "a": {k: _num(v) for k, v in self.proposed_action.items()},
            "sc": list(self.target_scope),
            "rk": list(self.resource_keys),
            "ep": self.state_epoch,
            "x": _ms(self.expires_at),
            "rv": _REV_CODE[self.reversibility_class],
            "r": round(self.risk_score, 4),
            "rb": self.rollback_handle.to_dict() if self.rollback_handle else None,
            "up": self.needs_upgrade,
            "br": sorted(self.blocking_req),
            "en": self.envelope.to_dict() if self.envelope else None,
        }


@dataclass(frozen=True)
class ConstraintRecord:
    scope: str
    kind: str
    limit: float
    observed: float
    source: str = "executor-local"

    def to_dict(self) -> dict[str, Any]:
        return {
            "scope": self.scope,
            "kind": self.kind,
            "limit": round(self.limit, 4),
            "observed": round(self.observed, 4),
            "source": self.source,
        }


@dataclass(frozen=True)
class CoordinationEvidence:
    """The C1 payload consumed by verifiers, never by actuation."""

    intent_id: str
    constraint_summary: tuple[ConstraintRecord, ...]
    conflict_candidates: tuple[str, ...] = ()
    missing_information: tuple[str, ...] = ()
    verifier_votes: tuple[str, ...] | None = None
    snapshot_epoch: int = 0
    evidence_uri: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "for_intent": self.intent_id,
            "snapshot_epoch": self.snapshot_epoch,
            "constraint_summary": [r.to_dict() for r in self.constraint_summary],
            "conflict_candidates": list(self.conflict_candidates),
            "missing_information": list(self.missing_information),
            "verifier_votes": list(self.verifier_votes) if self.verifier_votes is not None else None,
            "evidence_uri": self.evidence_uri,
        }


@dataclass(frozen=True)
class ProvenanceDigest:
    """The C2 post-hoc audit record."""

    intent_id: str
    decided_at_ms: float
    telemetry_snapshot_ids: tuple[str, ...]
    tool_version: str
    model_version: str
    policy_version: str
    verifier_version: str
    dependency_hashes: tuple[str, ...]
    signature: bytes
    evidence_uris: tuple[str, ...]
    retention_class: str = "standard"

    def to_dict(self) -> dict[str, Any]:
        return {
            "intent": self.intent_id,
            "decided_at": _ms(self.decided_at_ms),
            "telemetry_snapshot_ids": list(self.telemetry_snapshot_ids),
            "tool_version": self.tool_version,
            "model_version": self.model_version,
            "policy_version": self.policy_version,
            "verifier_version": self.verifier_version,
            "dependency_hashes": list(self.dependency_hashes),
            "signature": self.signature.hex(),
            "evidence_uris": list(self.evidence_uris),
            "retention_class": self.retention_class,
        }


# -- decisions -------------------------------------------------------------


class Stage1(str, Enum):
    COMMIT = "COMMIT"
    GATE = "GATE"
    REJECT = "REJECT"


class GateReason(str, Enum):
    NONE = "NONE"
    RISK_DIVERGENCE = "RISK_DIVERGENCE"
    LOCAL_CONFLICT = "LOCAL_CONFLICT"
    PLANNER_UPGRADE = "PLANNER_UPGRADE"
    MID_RISK = "MID_RISK"


EVIDENCE_MANDATORY = frozenset(
    {GateReason.RISK_DIVERGENCE, GateReason.LOCAL_CONFLICT, GateReason.PLANNER_UPGRADE}
)


class Terminal(str, Enum):
    COMMIT = "COMMIT"
    REJECT = "REJECT"
    HUMAN_GATE = "HUMAN_GATE"


@dataclass(frozen=True)
class Decision:
    stage1: Stage1
    gate_reason: GateReason
    stage2: Terminal | None
    terminal: Terminal
    degraded: bool = False

    def __post_init__(self) -> None:
        if (self.gate_reason is GateReason.NONE) != (self.stage1 is not Stage1.GATE):
            raise ValueError("gate_reason must be NONE exactly when stage1 is not GATE")
        if (self.stage2 is not None) != (self.stage1 is Stage1.GATE):
            raise ValueError("stage2 is present iff stage1 is GATE")
        if self.stage2 is None and self.terminal.value != self.stage1.value:
            raise ValueError("terminal must equal stage1 when no stage2 ran")
        if self.stage2 is not None and self.terminal is not self.stage2:
            raise ValueError("terminal must equal stage2 when stage2 ran")
        if self.degraded and self.stage2 is not Terminal.COMMIT:
            raise ValueError("degraded only applies to a stage2 COMMIT")


# -- thresholds ------------------------------------------------------------


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ThresholdConfig:
    tau_commit: float
    tau_reject: float
    tau_degraded: float
    delta_staleness_s: float
    d_min_s: float
    b_min_bytes: float
    eps_trust: float
    weights: tuple[float, float, float, float] = (0.3, 0.3, 0.2, 0.2)

    def __post_init__(self) -> None:
        for name in ("tau_commit", "tau_reject", "tau_degraded", "eps_trust"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name}={v} outside [0, 1]")
        if not self.tau_commit < self.tau_degraded < self.tau_reject:
            raise ConfigError("thresholds must satisfy tau_commit < tau_degraded < tau_reject")
        if len(self.weights) != 4 or any(w < 0 for w in self.weights):
            raise ConfigError("weights must be four non-negative numbers")
        if not math.isclose(sum(self.weights), 1.0, abs_tol=1e-9):
            raise ConfigError(f"weights sum to {sum(self.weights)}, expected 1")
        if self.delta_staleness_s <= 0 or self.d_min_s < 0 or self.b_min_bytes < 0:
            raise ConfigError("durations and byte floors must be non-negative (delta positive)")

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> ThresholdConfig:
        keys = {
            "tau_commit", "tau_reject", "tau_degraded", "delta_staleness_s",
            "d_min_s", "b_min_bytes", "eps_trust", "weights",
        }
        missing = keys - set(d)
        if missing:
            raise ConfigError(f"missing threshold keys: {sorted(missing)}")
        return cls(
            tau_commit=float(d["tau_commit"]),
            tau_reject=float(d["tau_reject"]),
            tau_degraded=float(d["tau_degraded"]),
            delta_staleness_s=float(d["delta_staleness_s"]),
            d_min_s=float(d["d_min_s"]),
            b_min_bytes=float(d["b_min_bytes"]),
            eps_trust=float(d["eps_trust"]),
            weights=tuple(float(w) for w in d["weights"]),  # type: ignore[arg-type]
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "tau_commit": self.tau_commit,
            "tau_reject": self.tau_reject,
            "tau_degraded": self.tau_degraded,
            "delta_staleness_s": self.delta_staleness_s,
            "d_min_s": self.d_min_s,
            "b_min_bytes": self.b_min_bytes,
            "eps_trust": self.eps_trust,
            "weights": list(self.weights),
        }


def load_thresholds(path: str | Path) -> ThresholdConfig:
    with open(path, encoding="utf-8") as fh:
        return ThresholdConfig.from_dict(json.load(fh))


def preset_path(name: str) -> Path:
    return Path(str(resources.files("riskgate") / "presets" / name))


def load_preset_json(name: str) -> dict[str, Any]:
    with open(preset_path(name), encoding="utf-8") as fh:
        return json.load(fh)


def default_thresholds(uc: str) -> ThresholdConfig:
    return ThresholdConfig.from_dict(load_preset_json(f"{uc.lower()}.json"))


# -- canonical encoding ----------------------------------------------------


class EncodingOverflow(ValueError):
    """Serialized payload fell outside its layer's byte window."""


C0_RANGE = (200, 400)
C1_RANGE = (400, 800)


def canonical_bytes(obj: Any) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True).encode()


def _framed(obj: dict[str, Any], bounds: tuple[int, int], layer: str) -> bytes:
    """Encode with a fixed-shape pad field raising short payloads to the
    layer's minimum frame size; payloads past the ceiling overflow."""
    lo, hi = bounds
    raw = canonical_bytes(obj)
    if len(raw) < lo:
        # '"pad":"",' costs 9 bytes before any fill
        body = dict(obj, pad="." * max(0, lo - len(raw) - 9))
        raw = canonical_bytes(body)
    if not lo <= len(raw) <= hi:
        raise EncodingOverflow(f"{layer} encoding is {len(raw)} B, expected [{lo}, {hi}]")
    return raw


def serialize_c0(c: ControlIntent) -> bytes:
    return _framed(c.to_dict(), C0_RANGE, "C0")


def serialize_c1(e: CoordinationEvidence) -> bytes:
    return _framed(e.to_dict(), C1_RANGE, "C1")


def serialize_c2(d: ProvenanceDigest) -> bytes:
    return canonical_bytes(d.to_dict())


def _ms(v: float) -> int:
    return int(round(v))


def _num(v: Any) -> Any:
    if isinstance(v, float):
        return round(v, 4)
    return v
