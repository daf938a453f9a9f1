"""Post-hoc audit emission: full provenance digests for commits that went
through Stage 2, a minimal transaction record for everything else.

Nothing here feeds back into a decision; the executor calls `attach` only
after the terminal decision is fixed.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Any, TextIO

from .contract import ControlIntent, ProvenanceDigest, Terminal, canonical_bytes, serialize_c2

if TYPE_CHECKING:  # pragma: no cover
    from .executor import DecisionRecord, ExecutorState


class AuditKind(str, Enum):
    FULL_C2 = "FULL_C2"
    MINIMAL = "MINIMAL"
    NONE = "NONE"


RETENTION_CLASSES = ("short", "standard", "extended")
EMIT_DELAY_MS = 1.0


@dataclass(frozen=True)
class VersionInfo:
    tool_version: str = "riskgate-0.1.0"
    model_version: str = "synthetic-planner-1"
    verifier_version: str = "verifiers-1"
    manifest: str = "pyproject.toml"


VERSIONS = VersionInfo()
# Pinned entries of the build manifest. Each gets a stand-in sha256 so that
# replays stay byte-identical regardless of the installed versions.
MANIFEST_ENTRIES = (
    "python",
    "numpy",
    "scipy",
    "jsonschema",
    "riskgate",
    "presets/uc1.json",
    "presets/uc2.json",
    "presets/scenario_uc1.json",
    "presets/scenario_uc2.json",
    "presets/slices.json",
    "presets/profile.json",
    "riskgate/contract.py",
    "riskgate/risk.py",
    "riskgate/executor.py",
    "riskgate/verifiers.py",
    "riskgate/audit.py",
    "riskgate/comparators.py",
    "riskgate/faults.py",
    "riskgate/scenario/engine.py",
)
_DEP_HASHES = tuple(
    f"sha256:{hashlib.sha256(f'{VERSIONS.manifest}:{dep}'.encode()).hexdigest()}" for dep in MANIFEST_ENTRIES
)


def classify(rec: DecisionRecord) -> AuditKind:
    """Stage-2 commits (quorum or degraded) get the full digest."""
    if rec.terminal is Terminal.COMMIT and rec.stage2 is Terminal.COMMIT:
        return AuditKind.FULL_C2
    return AuditKind.MINIMAL


def build_digest(rec: DecisionRecord, c: ControlIntent, policy_version: str) -> ProvenanceDigest:
    sig = hashlib.blake2b(
        canonical_bytes([rec.seed, rec.epoch, rec.system, c.intent_id, rec.terminal.value]), digest_size=64
    ).digest()
    base = f"ev://{rec.uc}/{rec.seed}/{c.intent_id}"
    return ProvenanceDigest(
        intent_id=c.intent_id,
        decided_at_ms=rec.decided_at_ms,
        telemetry_snapshot_ids=tuple(f"tm/{rec.uc}/{rec.epoch}/{s}" for s in c.target_scope),
        tool_version=VERSIONS.tool_version,
        model_version=VERSIONS.model_version,
        policy_version=policy_version,
        verifier_version=VERSIONS.verifier_version,
        dependency_hashes=_DEP_HASHES,
        signature=sig,
        evidence_uris=(f"{base}/c0", f"{base}/c1", f"{base}/votes", f"{base}/trace"),
        retention_class="extended" if rec.degraded else "standard",
    )


def digest_size(rec: DecisionRecord, c: ControlIntent, policy_version: str) -> int:
    return len(serialize_c2(build_digest(rec, c, policy_version)))


def minimal_record(rec: DecisionRecord) -> dict[str, Any]:
    return {
        "kind": AuditKind.MINIMAL.value,
        "intent": rec.intent_id,
        "seed": rec.seed,
        "epoch": rec.epoch,
        "system": rec.system,
        "terminal": rec.terminal.value,
        "gate_reason": rec.gate_reason.value,
        "decided_at": rec.decided_at_ms,
        "emitted_at": rec.decided_at_ms + EMIT_DELAY_MS,
    }


class AuditSink:
    """Append-only audit store. Writes JSONL when given a stream."""

    def __init__(self, stream: TextIO | None = None) -> None:
        self._stream = stream
        self.entries: list[dict[str, Any]] = []

    @classmethod
    def to_file(cls, path: str | Path) -> AuditSink:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        return cls(open(path, "a", encoding="utf-8"))

    def append(self, entry: dict[str, Any]) -> None:
        if entry["emitted_at"] <= entry["decided_at"]:
            raise ValueError("audit entries must be emitted strictly after the decision")
        self.entries.append(entry)
        if self._stream is not None:
            self._stream.write(json.dumps(entry, sort_keys=True) + "\n")

    def close(self) -> None:
        if self._stream is not None:
            self._stream.close()
            self._stream = None


def emit_audit(
    rec: DecisionRecord, c: ControlIntent, policy_version: str, sink: AuditSink | None = None
) -> tuple[AuditKind, int]:
    """Emit the audit entry for one terminal decision; returns (kind, C2 bytes)."""
    kind = classify(rec)
    c2 = 0
    entry = minimal_record(rec)
    if kind is AuditKind.FULL_C2:
        d = build_digest(rec, c, policy_version)
        c2 = len(serialize_c2(d))
        entry = dict(entry, kind=kind.value, digest=d.to_dict())
    if sink is not None:
        sink.append(entry)
    return kind, c2


def attach(
    rec: DecisionRecord, c: ControlIntent, e: ExecutorState, sink: AuditSink | None = None
) -> DecisionRecord:
    kind, c2 = emit_audit(rec, c, e.policy_version, sink)
    return dataclasses.replace(
        rec, audit_kind=kind.value, c2_bytes=c2, bytes_charged=rec.bytes_charged + c2
    )
