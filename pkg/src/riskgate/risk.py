"""Composite executor-local risk score and its normalized inputs."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable

from .contract import ControlIntent, ReversibilityClass

if TYPE_CHECKING:  # pragma: no cover
    from .executor import ExecutorState


@dataclass(frozen=True)
class TransactionState:
    """Executor-observable state of one in-flight transaction."""

    r_t: float
    d_t: float
    b_t: float
    c_t: float
    sigma_t: int
    rho_t: ReversibilityClass

    def __post_init__(self) -> None:
        if not 0.0 <= self.c_t <= 1.0:
            raise ValueError("conflict intensity must lie in [0, 1]")
        if self.sigma_t < 0:
            raise ValueError("epoch gap must be non-negative")


@dataclass(frozen=True)
class RiskInputs:
    phi: float
    sigma_hat: float
    c_hat: float
    n_hat: float


def delta_epochs(delta_staleness_s: float, epoch_s: float) -> int:
    """Staleness tolerance converted from seconds to whole epochs."""
    return max(1, int(math.ceil(delta_staleness_s / epoch_s - 1e-9)))


def compute_staleness_hat(exec_epoch: int, intent_epoch: int, delta_epochs: int) -> float:
    if delta_epochs < 1:
        raise ValueError("delta_epochs must be >= 1")
    return min(abs(exec_epoch - intent_epoch) / delta_epochs, 1.0)


def overlapping(intent: ControlIntent, registry: Iterable[ControlIntent]) -> list[ControlIntent]:
    keys = set(intent.resource_keys)
    return [a for a in registry if a.intent_id != intent.intent_id and keys.intersection(a.resource_keys)]


def compute_conflict_intensity(
    intent: ControlIntent, registry: Iterable[ControlIntent], uc_max: int
) -> float:
    if uc_max < 1:
        raise ValueError("uc_max must be >= 1")
    return min(len(overlapping(intent, registry)) / uc_max, 1.0)


def compute_contention(util: float, capacity: float) -> float:
    if capacity <= 0:
        raise ValueError("capacity must be positive")
    return min(max(util, 0.0) / capacity, 1.0)


def combine(inputs: RiskInputs, weights: tuple[float, float, float, float]) -> float:
    w_t, w_s, w_c, w_n = weights
    r = w_t * inputs.phi + w_s * inputs.sigma_hat + w_c * inputs.c_hat + w_n * inputs.n_hat
    return min(max(r, 0.0), 1.0)


def risk_inputs(
    c: ControlIntent,
    state: ExecutorState,
    *,
    use_staleness: bool = True,
    use_conflict: bool = True,
) -> RiskInputs:
    sigma = (
        compute_staleness_hat(state.epoch, c.state_epoch, state.delta_epochs) if use_staleness else 0.0
    )
    conflict = compute_conflict_intensity(c, state.active_intents, state.uc_max) if use_conflict else 0.0
    # contention is read at the primary target; secondary scope entries are
    # what the action leans on, and they show up through the conflict term
    n_hat = 0.0
    if c.target_scope and c.target_scope[0] in state.utilization:
        util, cap = state.utilization[c.target_scope[0]]
        n_hat = compute_contention(util, cap)
    return RiskInputs(c.phi, sigma, conflict, n_hat)


def compute_risk(c: ControlIntent, state: ExecutorState) -> float:
    """r_local with the configured weights, all four inputs active."""
    return combine(risk_inputs(c, state), state.config.weights)
