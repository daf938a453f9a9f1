"""Scenario preset schema. Loaded from the shipped JSON presets."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from ..contract import preset_path
from ..verifiers import VerifierConfig


@dataclass(frozen=True)
class LoadModel:
    period: int = 8640
    amplitude: float = 0.35
    mean: float = 0.45
    noise: float = 0.05
    lo: float = 0.05
    hi: float = 1.2
    phase_spread: float = 0.04  # fraction of a period between adjacent cells


@dataclass(frozen=True)
class SurgeModel:
    """Hidden demand bursts. Truth only; no online view includes them."""

    p_start: float = 0.01
    mean_duration: float = 6.0
    amp_lo: float = 0.3
    amp_hi: float = 0.7


@dataclass(frozen=True)
class Probabilities:
    p_stale: float = 0.02
    p_lag: float = 0.25
    p_conflict: float = 0.10
    p_block: float = 0.05
    p_upg: float = 0.05
    deadline_factor: float = 0.50
    p_late: float = 0.0005


@dataclass(frozen=True)
class DeadlineModel:
    median_s: float = 40.0
    sigma: float = 1.0


@dataclass(frozen=True)
class BandwidthModel:
    median_bytes: float = 8192.0
    sigma: float = 0.5


@dataclass(frozen=True)
class LatencyModel:
    local_ms: float = 10.0
    eager_mean_ms: float = 1800.0
    eager_sigma: float = 0.35


@dataclass(frozen=True)
class PlannerModel:
    telemetry_noise: float = 0.03
    risk_noise: float = 0.03
    upgrade_threshold: float = 0.25
    sleep_headroom: float = 0.85  # UC1: max post-sleep neighbor load the planner will propose
    sleep_fallback: str = "LOAD_REDIRECT"  # UC1: proposed instead when no sleep fits
    type_weights: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class Predicates:
    capacity_limit: float = 1.0
    sla_limit: float = 0.10
    slice_threshold: float = 0.10


@dataclass(frozen=True)
class ScenarioConfig:
    uc: str
    epoch_s: float
    uc_max: int
    hold_epochs: int
    topology: Mapping[str, Any]
    load: LoadModel = LoadModel()
    surge: SurgeModel = SurgeModel()
    probabilities: Probabilities = Probabilities()
    deadline: DeadlineModel = DeadlineModel()
    bandwidth: BandwidthModel = BandwidthModel()
    latency: LatencyModel = LatencyModel()
    planner: PlannerModel = PlannerModel()
    predicates: Predicates = Predicates()
    verifiers: VerifierConfig = VerifierConfig()

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> ScenarioConfig:
        kw: dict[str, Any] = {}
        for f in dataclasses.fields(cls):
            if f.name not in d:
                continue
            v = d[f.name]
            sub = _SECTIONS.get(f.name)
            kw[f.name] = sub(**v) if sub is not None else v
        return cls(**kw)

    def with_probabilities(self, **overrides: float) -> ScenarioConfig:
        return dataclasses.replace(
            self, probabilities=dataclasses.replace(self.probabilities, **overrides)
        )


_SECTIONS: dict[str, type] = {
    "load": LoadModel,
    "surge": SurgeModel,
    "probabilities": Probabilities,
    "deadline": DeadlineModel,
    "bandwidth": BandwidthModel,
    "latency": LatencyModel,
    "planner": PlannerModel,
    "predicates": Predicates,
    "verifiers": VerifierConfig,
}


def load_scenario(uc_or_path: str | Path) -> ScenarioConfig:
    p = Path(uc_or_path)
    if not p.exists():
        p = preset_path(f"scenario_{str(uc_or_path).lower()}.json")
    with open(p, encoding="utf-8") as fh:
        return ScenarioConfig.from_dict(json.load(fh))
