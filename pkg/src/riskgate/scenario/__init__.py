"""Seeded scenario engine for the two use cases. The run loop lives in
``riskgate.scenario.engine``."""
from __future__ import annotations

from .config import ScenarioConfig, load_scenario

__all__ = ["ScenarioConfig", "load_scenario"]
