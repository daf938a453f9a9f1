"""UC1: energy-saving policy push on a ring of cells."""
from __future__ import annotations

import random
from dataclasses import dataclass, field

from ..contract import ActionType, ConstraintRecord
from ..verifiers import Vote, uc1_load_verifier, uc1_sla_verifier
from .config import ScenarioConfig
from .network import Action, Impact, KpiAccumulator, LiveAction, load_trace, surge_trace

_THR_EXP = 0.3
SLEEP_POWER = 0.1
IDLE_POWER = 0.4
POWER_FACTORS = (0.9, 0.85, 0.8)
MIN_SPARE = 0.05


@dataclass
class CellConfig:
    asleep: list[bool]
    power: list[float]
    gain: list[float]
    redirects: list[tuple[int, int, float]] = field(default_factory=list)

    @classmethod
    def default(cls, n: int) -> CellConfig:
        return cls([False] * n, [1.0] * n, [1.0] * n)

    def copy(self) -> CellConfig:
        return CellConfig(list(self.asleep), list(self.power), list(self.gain), list(self.redirects))

    def apply(self, a: Action, idx: dict[str, int]) -> None:
        p = a.params
        if a.type is ActionType.CELL_SLEEP:
            self.asleep[idx[p["cell"]]] = True
        elif a.type is ActionType.CELL_WAKE:
            c = idx[p["cell"]]
            self.asleep[c] = False
            self.power[c] = 1.0
        elif a.type is ActionType.RF_POWER_REDUCE:
            c = idx[p["cell"]]
            self.power[c] = max(0.5, self.power[c] * float(p["f"]))
        elif a.type is ActionType.RF_RECONFIG:
            self.gain[idx[p["cell"]]] = float(p["g"])
        elif a.type is ActionType.LOAD_REDIRECT:
            self.redirects.append((idx[p["cell"]], idx[p["dst"]], float(p["frac"])))


@dataclass(frozen=True)
class Served:
    load: tuple[float, ...]
    cap: tuple[float, ...]
    thr: tuple[float, ...]  # per-user throughput seen by each cell's own users


class UC1Network:
    uc = "uc1"

    def __init__(self, cfg: ScenarioConfig, seed: int, first: int, count: int) -> None:
        self.cfg = cfg
        self.n = int(cfg.topology.get("cells", 7))
        self.names = [f"c{i}" for i in range(self.n)]
        self.idx = {nm: i for i, nm in enumerate(self.names)}
        self.first = first
        self._est = [load_trace(seed, i, first, count, cfg.load) for i in range(self.n)]
        self._surge = [surge_trace(seed, i, first, count, cfg.surge) for i in range(self.n)]
        self.live: list[LiveAction] = []
        self._cfg_cache: CellConfig | None = None

    # -- state --------------------------------------------------------
    def objects(self) -> list[str]:
        return list(self.names)

    def demand_est(self, t: int) -> list[float]:
        i = t - self.first
        return [self._est[c][i] for c in range(self.n)]

    def demand_true(self, t: int) -> list[float]:
        i = t - self.first
        return [self._est[c][i] + self._surge[c][i] for c in range(self.n)]

    def config(self) -> CellConfig:
        if self._cfg_cache is None:
            cc = CellConfig.default(self.n)
            for la in self.live:
                cc.apply(la.action, self.idx)
            self._cfg_cache = cc
        return self._cfg_cache

    def with_action(self, a: Action) -> CellConfig:
        cc = self.config().copy()
        cc.apply(a, self.idx)
        return cc

    def neighbors(self, c: int) -> tuple[int, int]:
        return (c - 1) % self.n, (c + 1) % self.n

    def _nearest_awake(self, c: int, step: int, asleep: list[bool]) -> int | None:
        for k in range(1, self.n):
            j = (c + step * k) % self.n
            if not asleep[j]:
                return j
        return None

    def served(self, demand: list[float], cc: CellConfig) -> Served:
        n = self.n
        load = list(demand)
        for src, dst, frac in cc.redirects:
            moved = frac * demand[src]
            load[src] -= moved
            load[dst] += moved
        cap = [0.0 if cc.asleep[c] else cc.power[c] * cc.gain[c] for c in range(n)]
        host: list[tuple[int, ...]] = [(c,) for c in range(n)]
        for c in range(n):
            if not cc.asleep[c]:
                continue
            left = self._nearest_awake(c, -1, cc.asleep)
            right = self._nearest_awake(c, +1, cc.asleep)
            if left is None or right is None:
                continue
            if left == right:
                load[left] += load[c]
                host[c] = (left,)
            else:
                sl = max(cap[left] - load[left], MIN_SPARE)
                sr = max(cap[right] - load[right], MIN_SPARE)
                share = load[c] * sl / (sl + sr)
                load[left] += share
                load[right] += load[c] - share
                host[c] = (left, right)
            load[c] = 0.0
        own = []
        for c in range(n):
            if cc.asleep[c]:
                own.append(0.0)
            else:
                q = min(1.0, cap[c] / load[c]) if load[c] > 1e-9 else 1.0
                own.append(cc.power[c] ** _THR_EXP * q)
        thr = tuple(
            own[c] if not cc.asleep[c] else sum(own[h] for h in host[c]) / len(host[c])
            for c in range(n)
        )
        return Served(tuple(load), tuple(cap), thr)

    def utilization(self, t: int) -> dict[str, tuple[float, float]]:
        """Executor telemetry: current (non-burst) load against capacity."""
        d = self.demand_est(t)
        s = self.served(d, self.config())
        out = {}
        for c, nm in enumerate(self.names):
            out[nm] = (s.load[c], s.cap[c]) if s.cap[c] > 0 else (d[c], 1.0)
        return out

    # -- planner ------------------------------------------------------
    def propose(self, view: list[float], rng: random.Random) -> Action:
        w = self.cfg.planner.type_weights or {
            "CELL_SLEEP": 0.25,
            "CELL_WAKE": 0.15,
            "RF_POWER_REDUCE": 0.25,
            "RF_RECONFIG": 0.15,
            "LOAD_REDIRECT": 0.20,
        }
        kinds = sorted(w)
        t = ActionType(rng.choices(kinds, weights=[w[k] for k in kinds])[0])
        cc = self.config()
        awake = [c for c in range(self.n) if not cc.asleep[c]]
        by_load = sorted(awake, key=lambda c: (view[c], c))
        nm = self.names
        if t is ActionType.CELL_SLEEP:
            # the planner only offers sleeps its own (lagged) view says the
            # neighbors can absorb
            fits = [c for c in by_load[:3] if len(awake) > 3 and self._sleep_fits(c, view, cc)]
            if not fits:
                t = ActionType(self.cfg.planner.sleep_fallback)
        if t is ActionType.CELL_SLEEP:
            c = rng.choice(fits)
            l, r = self.neighbors(c)
            scope = (nm[c], nm[l], nm[r])
            return Action(t, {"cell": nm[c]}, scope, (nm[c],), "down")
        if t is ActionType.CELL_WAKE:
            sleeping = [c for c in range(self.n) if cc.asleep[c]]
            c = rng.choice(sleeping) if sleeping else rng.choice(by_load[-3:])
            return Action(t, {"cell": nm[c]}, (nm[c],), (nm[c],), "up")
        if t is ActionType.RF_POWER_REDUCE:
            c = rng.choice(by_load[:3])
            f = rng.choice(POWER_FACTORS)
            return Action(t, {"cell": nm[c], "f": f}, (nm[c],), (nm[c],), "down")
        if t is ActionType.RF_RECONFIG:
            c = rng.choice(awake)
            g = round(rng.uniform(0.9, 1.15), 2)
            return Action(t, {"cell": nm[c], "g": g}, (nm[c],), (nm[c],), "up" if g >= 1 else "down")
        src = by_load[-1]
        cands = [j for j in self.neighbors(src) if not cc.asleep[j]] or [by_load[0]]
        dst = min(cands, key=lambda j: (view[j], j))
        frac = round(rng.uniform(0.1, 0.3), 2)
        scope = (nm[src], nm[dst])
        return Action(
            ActionType.LOAD_REDIRECT, {"cell": nm[src], "dst": nm[dst], "frac": frac}, scope, scope,
            f"{nm[src]}>{nm[dst]}",
        )

    def _sleep_fits(self, c: int, view: list[float], cc: CellConfig) -> bool:
        trial = cc.copy()
        trial.asleep[c] = True
        before, after = self.served(view, cc), self.served(view, trial)
        limit = self.cfg.planner.sleep_headroom
        return all(
            after.load[j] <= limit * after.cap[j]
            for j in range(self.n)
            if after.cap[j] > 0 and after.load[j] > before.load[j]
        )

    def view_contention(self, a: Action, view: list[float]) -> float:
        s = self.served(view, self.config())
        c = self.idx[a.scope[0]]
        return min(s.load[c] / s.cap[c] if s.cap[c] > 0 else view[c], 1.0)

    # -- evaluation ---------------------------------------------------
    def impact(self, a: Action, demand: list[float]) -> Impact:
        pre = self.served(demand, self.config())
        post = self.served(demand, self.with_action(a))
        pre_u, post_u, changes = [], [], []
        for o in a.scope:
            c = self.idx[o]
            pre_u.append(pre.load[c] / pre.cap[c] if pre.cap[c] > 0 else 0.0)
            post_u.append(post.load[c] / post.cap[c] if post.cap[c] > 0 else 0.0)
            if pre.thr[c] > 0:
                changes.append(post.thr[c] / pre.thr[c] - 1.0)
        return Impact(
            tuple(pre_u), tuple(post_u), self.cfg.predicates.capacity_limit,
            throughput_change=min(changes) if changes else 0.0,
        )

    def is_safe(self, a: Action, t: int) -> bool:
        imp = self.impact(a, self.demand_true(t))
        return not imp.breaches(self.cfg.predicates.sla_limit)

    def estimate(self, t: int, rng: random.Random) -> list[float]:
        e = self.cfg.verifiers.estimate_noise
        return [x * rng.uniform(1 - e, 1 + e) for x in self.demand_est(t)]

    def votes(self, a: Action, t: int, rng: random.Random) -> list[Vote]:
        imp = self.impact(a, self.estimate(t, rng))
        vc = self.cfg.verifiers
        return [uc1_load_verifier(imp.post, vc), uc1_sla_verifier(imp.throughput_change, vc)]

    def constraints(self, a: Action, t: int) -> tuple[ConstraintRecord, ...]:
        util = self.utilization(t)
        m = self.cfg.verifiers.load_margin
        return tuple(
            ConstraintRecord(o, "load_margin", m, util[o][0] / util[o][1]) for o in a.scope[:4]
        )

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
        cur = self.served(d, self.config())
        base = self.served(d, CellConfig.default(self.n))
        lim = self.cfg.predicates
        energy = energy_base = 0.0
        violated = 0
        for c in range(self.n):
            energy += _power(cur, c)
            energy_base += _power(base, c)
            over = cur.cap[c] > 0 and cur.load[c] / cur.cap[c] > lim.capacity_limit
            if over or cur.thr[c] < (1 - lim.sla_limit) * base.thr[c]:
                violated += 1
        acc.add(
            energy=energy,
            energy_base=energy_base,
            sla_cell_epochs=violated,
            thr=sum(cur.thr),
            thr_base=sum(base.thr),
        )
        acc.epochs += 1

    def kpi_summary(self, acc: KpiAccumulator) -> dict[str, float]:
        t = acc.totals
        if acc.epochs == 0:
            return {"energy_saving_pct": 0.0, "sla_violation_min": 0.0, "dthroughput_pct": 0.0}
        return {
            "energy_saving_pct": 100.0 * (1 - t["energy"] / t["energy_base"]),
            "sla_violation_min": t["sla_cell_epochs"] * self.cfg.epoch_s / 60.0,
            "dthroughput_pct": 100.0 * (t["thr"] / t["thr_base"] - 1),
        }


def _power(s: Served, c: int) -> float:
    if s.cap[c] <= 0:
        return SLEEP_POWER
    return IDLE_POWER * s.cap[c] + (1 - IDLE_POWER) * min(s.load[c], s.cap[c])
