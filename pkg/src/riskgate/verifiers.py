"""Verifier quorum and the four domain verifiers.

Verifiers only ever see an estimate of the post-action state handed to them
by the caller; they have no route to scenario truth.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass
from enum import Enum
from typing import Sequence


class Verdict(str, Enum):
    APPROVE = "APPROVE"
    VETO = "VETO"
    ABSTAIN = "ABSTAIN"


class Outcome(str, Enum):
    APPROVED = "APPROVED"
    CONFLICT = "CONFLICT"
    ESCALATE = "ESCALATE"


class EmptyVoteVector(ValueError):
    pass


class AllZeroAllocation(ValueError):
    pass


@dataclass(frozen=True)
class Vote:
    verdict: Verdict
    verifier_id: str
    rationale: str = ""


@dataclass(frozen=True)
class QuorumResult:
    outcome: Outcome
    votes: tuple[Vote, ...]


def quorum(votes: Sequence[Vote]) -> QuorumResult:
    """Unanimous approval commits, any veto conflicts, anything else escalates."""
    if not votes:
        raise EmptyVoteVector("quorum needs at least one vote")
    verdicts = [v.verdict for v in votes]
    if any(v is Verdict.VETO for v in verdicts):
        out = Outcome.CONFLICT
    elif all(v is Verdict.APPROVE for v in verdicts):
        out = Outcome.APPROVED
    else:
        out = Outcome.ESCALATE
    return QuorumResult(out, tuple(votes))


@dataclass(frozen=True)
class VerifierConfig:
    load_margin: float = 0.9
    load_hysteresis: float = 0.05
    sla_margin: float = 0.05
    sla_hysteresis: float = 0.05
    fairness_threshold: float = 0.75
    fairness_band: float = 0.02
    estimate_noise: float = 0.05

    @classmethod
    def from_dict(cls, d: dict) -> VerifierConfig:
        return cls(**{k: float(v) for k, v in d.items()})


def _banded_upper(value: float, limit: float, approve_below: float, vid: str, what: str) -> Vote:
    # higher is worse: VETO above limit, APPROVE at or below the inner edge
    if value > limit:
        return Vote(Verdict.VETO, vid, f"{what} {value:.4f} > {limit:.4f}")
    if value <= approve_below:
        return Vote(Verdict.APPROVE, vid, f"{what} {value:.4f} <= {approve_below:.4f}")
    return Vote(Verdict.ABSTAIN, vid, f"{what} {value:.4f} in hysteresis band")


def uc1_load_verifier(post_load_ratios: Sequence[float], cfg: VerifierConfig = VerifierConfig()) -> Vote:
    """post_load_ratios: estimated post-action load/capacity of every affected cell."""
    worst = max(post_load_ratios) if post_load_ratios else 0.0
    return _banded_upper(
        worst, cfg.load_margin, cfg.load_margin * (1 - cfg.load_hysteresis), "uc1.load", "load"
    )


def uc1_sla_verifier(throughput_change: float, cfg: VerifierConfig = VerifierConfig()) -> Vote:
    """throughput_change: predicted relative per-user throughput change (negative = drop)."""
    drop = max(0.0, -throughput_change)
    return _banded_upper(
        drop, cfg.sla_margin, cfg.sla_margin * (1 - cfg.sla_hysteresis), "uc1.sla", "throughput drop"
    )


def uc2_isolation_verifier(
    allocations: Sequence[float], guarantees: Sequence[float]
) -> Vote:
    if len(allocations) != len(guarantees):
        raise ValueError("allocation and guarantee vectors differ in length")
    for i, (a, g) in enumerate(zip(allocations, guarantees)):
        if a < g:
            return Vote(Verdict.VETO, "uc2.isolation", f"slice {i} at {a:.4f} < guarantee {g:.4f}")
    return Vote(Verdict.APPROVE, "uc2.isolation", "all guarantees met")


def jain_index(allocations: Sequence[float]) -> float:
    if not allocations:
        raise ValueError("empty allocation list")
    if any(x < 0 for x in allocations):
        raise ValueError("allocations must be non-negative")
    s = math.fsum(allocations)
    if s == 0:
        raise AllZeroAllocation("all allocations are zero")
    sq = math.fsum(x * x for x in allocations)
    return (s * s) / (len(allocations) * sq)


def uc2_fairness_verifier(
    shares: Sequence[float], cfg: VerifierConfig = VerifierConfig()
) -> Vote:
    j = jain_index(shares)
    if j < cfg.fairness_threshold:
        return Vote(Verdict.VETO, "uc2.fairness", f"jain {j:.4f} < {cfg.fairness_threshold}")
    if j < cfg.fairness_threshold + cfg.fairness_band:
        return Vote(Verdict.ABSTAIN, "uc2.fairness", f"jain {j:.4f} in band")
    return Vote(Verdict.APPROVE, "uc2.fairness", f"jain {j:.4f}")


def flip(v: Vote) -> Vote:
    """Verifier-fault semantics: swap APPROVE and VETO, leave ABSTAIN alone."""
    if v.verdict is Verdict.APPROVE:
        return Vote(Verdict.VETO, v.verifier_id, "fault: flipped")
    if v.verdict is Verdict.VETO:
        return Vote(Verdict.APPROVE, v.verifier_id, "fault: flipped")
    return v


# Eager-path latency: C1 fetch plus two verifier round trips, lognormal.
LATENCY_SIGMA = 0.35
LATENCY_MEAN_MS = 1800.0
LATENCY_MU = math.log(LATENCY_MEAN_MS) - LATENCY_SIGMA**2 / 2


def quorum_latency(rng: random.Random, mu: float = LATENCY_MU, sigma: float = LATENCY_SIGMA) -> float:
    return rng.lognormvariate(mu, sigma)
