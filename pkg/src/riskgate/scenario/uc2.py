"""UC2: slice-SLA protection on a small cell x slice grid."""
from __future__ import annotations

import random
from dataclasses import dataclass, field

from ..contract import ActionType, ConstraintRecord
from ..verifiers import Vote, jain_index, uc2_fairness_verifier, uc2_isolation_verifier
from .config import ScenarioConfig
from .network import Action, Impact, KpiAccumulator, LiveAction, load_trace, surge_trace

DEFAULT_ALLOC = (0.38, 0.22, 0.15, 0.25)
DEFAULT_FLOOR = (0.30, 0.17, 0.11, 0.19)
BLOCKED_WEIGHT = 0.5


@dataclass
class SliceConfig:
    alloc: list[list[float]]
    adm: list[list[float]]
    moves: list[tuple[int, int, int, float]] = field(default_factory=list)  # (from, to, slice, frac)

    def copy(self) -> SliceConfig:
        return SliceConfig([list(r) for r in self.alloc], [list(r) for r in self.adm], list(self.moves))


class UC2Network:
    uc = "uc2"

    def __init__(self, cfg: ScenarioConfig, seed: int, first: int, count: int) -> None:
        self.cfg = cfg
        top = cfg.topology
        self.nc = int(top.get("cells", 3))
        self.base_alloc = tuple(float(x) for x in top.get("allocation", DEFAULT_ALLOC))
        self.floor = tuple(float(x) for x in top.get("guarantee_floor", DEFAULT_FLOOR))
        self.ns = len(self.base_alloc)
        self.demand_scale = tuple(float(x) for x in top.get("demand_scale", (0.6, 0.8)))
        self.names = [[f"k{k}s{s}" for s in range(self.ns)] for k in range(self.nc)]
        self.idx = {self.names[k][s]: (k, s) for k in range(self.nc) for s in range(self.ns)}
        self.first = first
        a, b = self.demand_scale
        self._est = []
        self._surge = []
        for k in range(self.nc):
            rows, srows = [], []
            for s in range(self.ns):
                obj = k * self.ns + s
                tr = load_trace(seed, obj, first, count, cfg.load)
                rows.append([self.base_alloc[s] * (a + b * x) for x in tr])
                srows.append(surge_trace(seed, obj, first, count, cfg.surge))
            self._est.append(rows)
            self._surge.append(srows)
        self.live: list[LiveAction] = []
        self._cfg_cache: SliceConfig | None = None

    def objects(self) -> list[str]:
        return [nm for row in self.names for nm in row]

    def demand_est(self, t: int) -> list[list[float]]:
        i = t - self.first
        return [[self._est[k][s][i] for s in range(self.ns)] for k in range(self.nc)]

    def demand_true(self, t: int) -> list[list[float]]:
        i = t - self.first
        return [
            [self._est[k][s][i] * (1 + self._surge[k][s][i]) for s in range(self.ns)]
            for k in range(self.nc)
        ]

    def default_config(self) -> SliceConfig:
        return SliceConfig(
            [list(self.base_alloc) for _ in range(self.nc)], [[1.0] * self.ns for _ in range(self.nc)]
        )

    def _apply(self, cc: SliceConfig, a: Action) -> None:
        p = a.params
        k, s = self.idx[a.scope[0]]
        if a.type in (ActionType.SLICE_PRIORITY_BOOST, ActionType.SLICE_RESOURCE_REALLOC):
            d = int(p["donor"])
            amt = min(float(p["amt"]), cc.alloc[k][d])
            cc.alloc[k][d] -= amt
            cc.alloc[k][s] += amt
        elif a.type is ActionType.SLICE_ADMISSION_RESTRICT:
            cc.adm[k][s] = min(cc.adm[k][s], float(p["adm"]))
        elif a.type is ActionType.LOAD_BALANCE_UPDATE:
            cc.moves.append((k, int(p["to"]), s, float(p["frac"])))

    def config(self) -> SliceConfig:
        if self._cfg_cache is None:
            cc = self.default_config()
            for la in self.live:
                self._apply(cc, la.action)
            self._cfg_cache = cc
        return self._cfg_cache

    def with_action(self, a: Action) -> SliceConfig:
        cc = self.config().copy()
        self._apply(cc, a)
        return cc

    @staticmethod
    def effective_demand(demand: list[list[float]], cc: SliceConfig) -> list[list[float]]:
        d = [list(r) for r in demand]
        for k0, k1, s, frac in cc.moves:
            moved = frac * demand[k0][s]
            d[k0][s] -= moved
            d[k1][s] += moved
        return d

    def unserved(self, demand: list[list[float]], cc: SliceConfig) -> list[list[float]]:
        d = self.effective_demand(demand, cc)
        out = []
        for k in range(self.nc):
            row = []
            for s in range(self.ns):
                dem, adm, al = d[k][s], cc.adm[k][s], cc.alloc[k][s]
                if dem <= 1e-12:
                    row.append(0.0)
                    continue
                row.append(max(0.0, adm * dem - al) / dem + BLOCKED_WEIGHT * (1 - adm))
            out.append(row)
        return out

    def cell_load(self, demand: list[list[float]], cc: SliceConfig) -> list[float]:
        """Admitted demand over allocated share, pooled across the cell's slices."""
        d = self.effective_demand(demand, cc)
        return [
            sum(d[k][s] * cc.adm[k][s] for s in range(self.ns)) / max(sum(cc.alloc[k]), 1e-6)
            for k in range(self.nc)
        ]

    def utilization(self, t: int) -> dict[str, tuple[float, float]]:
        """Executor telemetry: slices contend for their cell's shared pool, so
        every slice object reports its cell's pooled load."""
        cc = self.config()
        loads = self.cell_load(self.demand_est(t), cc)
        return {self.names[k][s]: (loads[k], 1.0) for k in range(self.nc) for s in range(self.ns)}

    # -- planner ------------------------------------------------------
    def propose(self, view: list[list[float]], rng: random.Random) -> Action:
        w = self.cfg.planner.type_weights or {
            "SLICE_PRIORITY_BOOST": 0.25,
            "SLICE_ADMISSION_RESTRICT": 0.15,
            "SLICE_RESOURCE_REALLOC": 0.20,
            "LOAD_BALANCE_UPDATE": 0.20,
            "SLA_ESCALATE": 0.20,
        }
        kinds = sorted(w)
        t = ActionType(rng.choices(kinds, weights=[w[k] for k in kinds])[0])
        cc = self.config()
        u = self.unserved(view, cc)
        cells = [(k, s) for k in range(self.nc) for s in range(self.ns)]
        stressed = sorted(cells, key=lambda ks: (-u[ks[0]][ks[1]], ks))
        k, s = rng.choice(stressed[:3])
        nm = self.names
        tgt = nm[k][s]
        if t in (ActionType.SLICE_PRIORITY_BOOST, ActionType.SLICE_RESOURCE_REALLOC):
            eff = self.effective_demand(view, cc)
            spare = [(cc.alloc[k][j] - eff[k][j], j) for j in range(self.ns) if j != s]
            d = max(spare)[1]
            amt = 0.03 if t is ActionType.SLICE_PRIORITY_BOOST else round(rng.uniform(0.04, 0.12), 3)
            scope = (tgt, nm[k][d])
            return Action(t, {"donor": d, "amt": amt}, scope, scope, "up")
        if t is ActionType.SLICE_ADMISSION_RESTRICT:
            adm = round(rng.uniform(0.85, 0.95), 3)
            return Action(t, {"adm": adm}, (tgt,), (tgt,), "down")
        if t is ActionType.LOAD_BALANCE_UPDATE:
            others = [j for j in range(self.nc) if j != k]
            to = min(others, key=lambda j: (u[j][s], j))
            frac = round(rng.uniform(0.1, 0.25), 3)
            scope = (tgt, nm[to][s])
            return Action(t, {"to": to, "frac": frac}, scope, scope, f"k{k}>k{to}")
        return Action(ActionType.SLA_ESCALATE, {"lvl": 1}, (tgt,), (tgt,), "esc")

    def view_contention(self, a: Action, view: list[list[float]]) -> float:
        loads = self.cell_load(view, self.config())
        return min(loads[self.idx[a.scope[0]][0]], 1.0)

    # -- evaluation ---------------------------------------------------
    def guarantee(self, s: int, demand: float) -> float:
        """Contracted floor, raised to what current demand needs to stay within SLA."""
        return max(self.floor[s], (1 - self.cfg.predicates.slice_threshold) * demand)

    def impact(self, a: Action, demand: list[list[float]]) -> Impact:
        pre_cc, post_cc = self.config(), self.with_action(a)
        pre_u = self.unserved(demand, pre_cc)
        post_u = self.unserved(demand, post_cc)
        post_d = self.effective_demand(demand, post_cc)
        pre_v, post_v, allocs, guars = [], [], [], []
        for i, o in enumerate(a.scope):
            k, s = self.idx[o]
            pre_v.append(pre_u[k][s])
            post_v.append(post_u[k][s])
            if i > 0:  # objects the action draws from or pushes onto
                allocs.append(post_cc.alloc[k][s])
                guars.append(self.guarantee(s, post_d[k][s] * post_cc.adm[k][s]))
        k0, _ = self.idx[a.scope[0]]
        shares = tuple(max(0.0, 1 - x) for x in post_u[k0])
        return Impact(
            tuple(pre_v), tuple(post_v), self.cfg.predicates.slice_threshold,
            allocations=tuple(allocs), guarantees=tuple(guars), shares=shares,
        )

    def is_safe(self, a: Action, t: int) -> bool:
        return not self.impact(a, self.demand_true(t)).breaches()

    def estimate(self, t: int, rng: random.Random) -> list[list[float]]:
        e = self.cfg.verifiers.estimate_noise
        return [[x * rng.uniform(1 - e, 1 + e) for x in row] for row in self.demand_est(t)]

    def votes(self, a: Action, t: int, rng: random.Random) -> list[Vote]:
        imp = self.impact(a, self.estimate(t, rng))
        vc = self.cfg.verifiers
        shares = imp.shares if any(x > 0 for x in imp.shares) else (1.0,)
        return [
            uc2_isolation_verifier(imp.allocations, imp.guarantees),
            uc2_fairness_verifier(shares, vc),
        ]

    def constraints(self, a: Action, t: int) -> tuple[ConstraintRecord, ...]:
        cc = self.config()
        d = self.effective_demand(self.demand_est(t), cc)
        out = []
        for o in a.scope[:4]:
            k, s = self.idx[o]
            out.append(ConstraintRecord(o, "slice_guarantee", self.guarantee(s, d[k][s]), cc.alloc[k][s]))
        return tuple(out)

    # -- lifecycle ----------------------------------------------------
    def commit(self, a: Action, intent_id: str, t: int) -> None:
        self.live.append(LiveAction(a, intent_id, t + self.cfg.hold_epochs))
        self._cfg_cache = None

    def prune(self, t: int) -> list[str]:
        gone = [la.intent_id for la in self.live if la.until_epoch <= t]
        if gone:
            self.live = [la for la in self.live if la.until_epoch > t]
            self._cfg_cache = None
        return gone

    def kpi_step(self, t: int, acc: KpiAccumulator) -> None:
        d = self.demand_true(t)
        cc = self.config()
        u = self.unserved(d, cc)
        ub = self.unserved(d, self.default_config())
        eff = self.effective_demand(d, cc)
        thr = self.cfg.predicates.slice_threshold
        viol = sum(1 for row in u for x in row if x > thr)
        served = sum(eff[k][s] * (1 - min(u[k][s], 1.0)) for k in range(self.nc) for s in range(self.ns))
        served_b = sum(d[k][s] * (1 - min(ub[k][s], 1.0)) for k in range(self.nc) for s in range(self.ns))
        jain = sum(jain_index([max(1e-9, 1 - min(x, 1.0)) for x in row]) for row in u) / self.nc
        acc.add(violations=viol, slots=self.nc * self.ns, served=served, served_base=served_b, jain=jain)
        acc.epochs += 1

    def kpi_summary(self, acc: KpiAccumulator) -> dict[str, float]:
        t = acc.totals
        if acc.epochs == 0:
            return {"slice_sla_violation_pct": 0.0, "jain_index": 1.0, "dthroughput_pct": 0.0}
        return {
            "slice_sla_violation_pct": 100.0 * t["violations"] / t["slots"],
            "jain_index": t["jain"] / acc.epochs,
            "dthroughput_pct": 100.0 * (t["served"] / t["served_base"] - 1),
        }
