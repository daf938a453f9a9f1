"""Shared pieces of the two network models: load traces, hidden surges and
the action record."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Mapping

import numpy as np

from ..contract import ActionType
from .config import LoadModel, SurgeModel
from .streams import np_substream

NOISE_BLOCK = 256


@dataclass(frozen=True)
class Action:
    """A concrete network action proposed by the planner."""

    type: ActionType
    params: Mapping[str, Any]
    scope: tuple[str, ...]
    keys: tuple[str, ...]
    direction: str


@dataclass
class LiveAction:
    action: Action
    intent_id: str
    until_epoch: int


@dataclass(frozen=True)
class Impact:
    """Pre/post comparison of an action on its affected objects."""

    pre: tuple[float, ...]
    post: tuple[float, ...]
    limit: float
    throughput_change: float = 0.0
    allocations: tuple[float, ...] = ()
    guarantees: tuple[float, ...] = ()
    shares: tuple[float, ...] = ()

    def breaches(self, sla_limit: float | None = None) -> bool:
        worse = any(p > self.limit and p > q + 1e-12 for q, p in zip(self.pre, self.post))
        if sla_limit is not None and self.throughput_change < -sla_limit:
            return True
        return worse


@lru_cache(maxsize=4096)
def _noise_block(seed: int, obj: int, block: int, sigma: float) -> np.ndarray:
    return np_substream(seed, "load", obj, block).normal(0.0, sigma, NOISE_BLOCK)


def diurnal_load(epoch: int, cell: int, seed: int, model: LoadModel = LoadModel()) -> float:
    """Sinusoidal daily load with a per-cell phase offset and additive noise."""
    phase = cell * model.phase_spread
    base = model.mean + model.amplitude * math.sin(2 * math.pi * (epoch / model.period + phase))
    noise = float(_noise_block(seed, cell, epoch // NOISE_BLOCK, model.noise)[epoch % NOISE_BLOCK])
    return min(max(base + noise, model.lo), model.hi)


def load_trace(seed: int, cell: int, first: int, count: int, model: LoadModel) -> list[float]:
    return [diurnal_load(first + i, cell, seed, model) for i in range(count)]


def surge_trace(seed: int, obj: int, first: int, count: int, model: SurgeModel) -> list[float]:
    """Burst amplitude per epoch over [first, first+count); zero outside bursts."""
    rng = np_substream(seed, "surge", obj, first)
    out = [0.0] * count
    starts = rng.random(count) < model.p_start
    durs = rng.geometric(1.0 / max(model.mean_duration, 1.0), count)
    amps = rng.uniform(model.amp_lo, model.amp_hi, count)
    for i in np.flatnonzero(starts):
        for j in range(int(i), min(count, int(i) + int(durs[i]))):
            out[j] = max(out[j], float(amps[i]))
    return out


@dataclass
class KpiAccumulator:
    totals: dict[str, float] = field(default_factory=dict)
    epochs: int = 0

    def add(self, **vals: float) -> None:
        for k, v in vals.items():
            self.totals[k] = self.totals.get(k, 0.0) + v
