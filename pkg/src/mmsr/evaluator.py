"""Final-sequence construction and work-overload / reinsertion objectives.

Overload follows the side-by-side policy on closed stations: the operator
starts a workpiece at offset ``z``, anything past the station border ``l``
is overload, and the next piece starts at ``max(0, z + b - w - c)``. The
last position of a sequence must leave the station empty (regenerative
plan), so its overload is ``max(0, z + b - c)``.

Final sequences are lists of *tokens*: a gid for a real vehicle, ``~gid``
(i.e. ``-gid - 1``) for a neutral, dummy-reinserted vehicle whose load is
the cycle time at every station.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import _kernels as _k

from .feasibility import lambda_violations, ready_bound
from .model import (
    SKIP,
    ContractViolation,
    FinalSequence,
    Instance,
    ObjectivePoint,
    ReinsertionPlan,
    Scenario,
    Solution,
)


def station_overload(loads_b: Sequence[int], length_l: int, cycle_c: int) -> Tuple[List[int], int]:
    """Minimum overload of one station for a sequence of loads.

    Returns the per-position overloads and their total.
    """
    if length_l < cycle_c:
        raise ContractViolation(f"station length {length_l} < cycle {cycle_c}")
    if any(b < 0 for b in loads_b):
        raise ContractViolation("negative load")
    w = []
    z = 0
    last = len(loads_b) - 1
    for t, b in enumerate(loads_b):
        x = z + b
        if t == last:
            wt = x - cycle_c if x > cycle_c else 0
            z = 0
        else:
            wt = x - length_l if x > length_l else 0
            x -= wt
            z = x - cycle_c if x > cycle_c else 0
        w.append(wt)
    return w, sum(w)


@dataclass
class StationState:
    start_z: List[List[int]]
    overload_w: List[List[int]]
    load_b: List[List[int]]


def station_states(final: FinalSequence, instance: Instance) -> StationState:
    """Per-station start offsets, overloads and loads along a final sequence."""
    c = instance.cycle
    zs, ws, bs = [], [], []
    for k, lk in enumerate(instance.lengths):
        b = [c if neutral else instance.loads[g][k] for g, neutral in final.entries]
        w, _ = station_overload(b, lk, c)
        z = [0]
        for t in range(len(b) - 1):
            x = z[-1] + b[t] - w[t]
            z.append(x - c if x > c else 0)
        zs.append(z)
        ws.append(w)
        bs.append(b)
    return StationState(zs, ws, bs)


def _final_tokens(first_stage: Sequence[int], exist: Sequence[bool],
                  plan: ReinsertionPlan) -> List[int]:
    inserts = sorted((t, g) for g, t in plan.items() if t != SKIP)
    skipped = sorted(g for g, t in plan.items() if t == SKIP)
    out = []
    k = 0
    m = len(inserts)
    for p, v in enumerate(first_stage, 1):
        while k < m and inserts[k][0] <= p:
            out.append(inserts[k][1])
            k += 1
        if exist[v]:
            out.append(v)
    while k < m:
        out.append(inserts[k][1])
        k += 1
    out.extend(~g for g in skipped)
    return out


def build_final_sequence(first_stage: Sequence[int], scenario: Scenario,
                         plan: ReinsertionPlan,
                         instance: Optional[Instance] = None) -> FinalSequence:
    """Apply failures and reinsertions to a first-stage permutation.

    ``InsertAt(t)`` puts the vehicle immediately before the surviving
    vehicle with the smallest original position ``>= t``; skipped vehicles
    become trailing neutral entries in gid order. With ``instance`` given,
    targets earlier than the being-ready bound raise ``ContractViolation``.
    """
    n = len(first_stage)
    expected = set(scenario.failed(n))
    if set(plan) != expected:
        raise ContractViolation(f"plan covers {sorted(plan)}, scenario failed {sorted(expected)}")
    if instance is not None:
        pos = _positions(first_stage)
        for g, t in plan.items():
            if t != SKIP and t < ready_bound(instance, g, pos):
                raise ContractViolation(
                    f"vehicle {instance.vehicle_id(g)} reinserted at {t} before it is ready")
    tokens = _final_tokens(first_stage, scenario.exist_mask, plan)
    return FinalSequence(tuple((g, False) if g >= 0 else (~g, True) for g in tokens))


def _positions(first_stage: Sequence[int]) -> List[int]:
    pos = [0] * len(first_stage)
    for p, v in enumerate(first_stage, 1):
        pos[v] = p
    return pos


class EvalState:
    """Cached sweeps of every scenario of one solution.

    ``finals[w, :L_w]`` is the final token sequence, ``zs[w, t]`` the
    per-station offset before final position ``t``, ``wpos[w, t]`` the
    overload summed over stations at ``t`` and ``totals[w]`` its sum.
    """

    __slots__ = ("finals", "zs", "wpos", "totals", "packed", "re", "lam")

    def __init__(self, finals, zs, wpos, totals, packed, re, lam):
        self.finals = finals
        self.zs = zs
        self.wpos = wpos
        self.totals = totals
        self.packed = packed
        self.re = re
        self.lam = lam

    def copy(self) -> "EvalState":
        return EvalState(self.finals.copy(), self.zs.copy(), self.wpos.copy(),
                         self.totals.copy(), self.packed, list(self.re), list(self.lam))


@dataclass
class Move:
    """A candidate change: a new first stage and/or replacement plans."""
    first_stage: Optional[List[int]] = None
    plans: Dict[int, ReinsertionPlan] = field(default_factory=dict)


@dataclass
class Trial:
    move: Move
    wo_sum: int
    re_sum: int
    violation_degree: int
    first: object = None
    packed: object = None
    scen: object = None
    re: Dict[int, int] = field(default_factory=dict)
    lam: Dict[int, int] = field(default_factory=dict)

    def point(self, n_scenarios: int) -> ObjectivePoint:
        return ObjectivePoint(self.wo_sum / (10 * n_scenarios), self.re_sum / n_scenarios)


class Evaluator:
    """Objective evaluation bound to one instance and one scenario sample.

    Per-scenario sweeps are cached on the solution, so a move only
    re-sweeps from its first changed position until the offsets rejoin
    the cached ones.
    """

    def __init__(self, instance: Instance, scenarios: Sequence[Scenario]):
        self.instance = instance
        self.scenarios = list(scenarios)
        self.N = len(self.scenarios)
        self.n = instance.n
        self.c = instance.cycle
        self.K = instance.n_stations
        self.penalty = list(instance.penalties)
        self.failed = [sc.failed(self.n) for sc in self.scenarios]
        self.exist = [sc.exist_mask for sc in self.scenarios]
        self._failed_sets = [set(f) for f in self.failed]
        self._loads = np.array(list(instance.loads) + [instance.neutral_load],
                               dtype=np.int64).reshape(-1, self.K)
        self._lengths = np.array(instance.lengths, dtype=np.int64)
        self._exist = np.array(self.exist, dtype=np.bool_).reshape(self.N, self.n)
        self._nfailed = np.array([len(f) for f in self.failed], dtype=np.int64)
        self._lens = np.array([self.n + len(sc.old_present) for sc in self.scenarios],
                              dtype=np.int64)
        self._width = 1 + 2 * max([len(f) for f in self.failed] + [0])
        self._all = np.arange(self.N, dtype=np.int64)
        # memo of full evaluations, sized to stay within a few tens of MB
        state_bytes = 8 * self.N * (self.n + self.instance.f_max + 1) * (2 * self.K + 2)
        self._memo_cap = min(20000, (48 << 20) // max(1, state_bytes))
        self._memo: Dict[tuple, EvalState] = {}

    def plan_re(self, plan: ReinsertionPlan) -> int:
        pen = self.penalty
        return sum(pen[g] for g, t in plan.items() if t == SKIP)

    def plan_lam(self, plan: ReinsertionPlan) -> int:
        return lambda_violations([t for t in plan.values() if t != SKIP],
                                 self.n, self.instance.lam)

    def _pack(self, plan: ReinsertionPlan) -> List[int]:
        inserts = sorted((t, g) for g, t in plan.items() if t != SKIP)
        skipped = sorted(g for g, t in plan.items() if t == SKIP)
        row = [len(inserts)] + [t for t, _ in inserts] + [g for _, g in inserts] + skipped
        return row + [0] * (self._width - len(row))

    # -- public API -------------------------------------------------------
    def evaluate(self, solution: Solution) -> ObjectivePoint:
        """Full evaluation; caches totals and per-scenario sweeps."""
        if len(solution.plans) != self.N:
            raise ContractViolation(f"{len(solution.plans)} plans for {self.N} scenarios")
        for w, plan in enumerate(solution.plans):
            if len(plan) != len(self.failed[w]) or not self._failed_sets[w].issuperset(plan):
                raise ContractViolation(f"plan {w} does not cover the failed vehicles of scenario {w}")
        rows = [self._pack(p) for p in solution.plans]
        key = None
        if self._memo_cap:
            key = (tuple(solution.first_stage), tuple(map(tuple, rows)))
            hit = self._memo.get(key)
            if hit is not None:
                solution.states = hit.copy()
                solution.n_scenarios = self.N
                self._retotal(solution)
                solution.evaluated = True
                return solution.point()
        packed = np.array(rows, dtype=np.int64).reshape(self.N, self._width)
        first = np.asarray(solution.first_stage, dtype=np.int64)
        finals, zs, wpos, totals = _k.evaluate_all(first, self._exist, packed, self._nfailed,
                                                   self._lens, self._loads, self._lengths, self.c)
        solution.states = EvalState(finals, zs, wpos, totals, packed,
                                    [self.plan_re(p) for p in solution.plans],
                                    [self.plan_lam(p) for p in solution.plans])
        if key is not None:
            if len(self._memo) >= self._memo_cap:
                self._memo.clear()
            self._memo[key] = solution.states.copy()
        solution.n_scenarios = self.N
        self._retotal(solution)
        solution.evaluated = True
        return solution.point()

    def _retotal(self, solution: Solution) -> None:
        st = solution.states
        solution.wo_sum = int(st.totals.sum())
        solution.re_sum = sum(st.re)
        solution.violation_degree = sum(st.lam)

    def ensure(self, solution: Solution) -> Solution:
        if not solution.evaluated or solution.states is None:
            self.evaluate(solution)
        return solution

    def _apply(self, st: EvalState, trial: Trial, write: bool):
        return _k.apply(trial.first, self._exist, trial.packed, self._nfailed, self._lens,
                        trial.scen, st.finals, st.zs, st.wpos, st.totals,
                        self._loads, self._lengths, self.c, write)

    def trial(self, solution: Solution, move: Move) -> Trial:
        """Objectives of ``solution`` with ``move`` applied, without mutating it."""
        self.ensure(solution)
        st = solution.states
        if move.first_stage is not None:
            first = np.asarray(move.first_stage, dtype=np.int64)
            scen = self._all
        else:
            first = np.asarray(solution.first_stage, dtype=np.int64)
            scen = np.array(sorted(move.plans), dtype=np.int64)
        packed = st.packed
        re = solution.re_sum
        lam = solution.violation_degree
        new_re, new_lam = {}, {}
        if move.plans:
            packed = packed.copy()
            for w, plan in move.plans.items():
                packed[w] = self._pack(plan)
                new_re[w] = self.plan_re(plan)
                new_lam[w] = self.plan_lam(plan)
                re += new_re[w] - st.re[w]
                lam += new_lam[w] - st.lam[w]
        trial = Trial(move, solution.wo_sum, re, lam, first, packed, scen, new_re, new_lam)
        trial.wo_sum += int(self._apply(st, trial, False).sum())
        return trial

    def commit(self, solution: Solution, trial: Trial) -> None:
        st = solution.states
        self._apply(st, trial, True)
        move = trial.move
        if move.first_stage is not None:
            solution.first_stage = list(move.first_stage)
        for w, plan in move.plans.items():
            solution.plans[w] = plan
            st.re[w] = trial.re[w]
            st.lam[w] = trial.lam[w]
        st.packed = trial.packed
        solution.wo_sum = trial.wo_sum
        solution.re_sum = trial.re_sum
        solution.violation_degree = trial.violation_degree

    def scenario_totals(self, solution: Solution) -> List[int]:
        self.ensure(solution)
        return [int(t) for t in solution.states.totals]


def evaluate(solution: Solution, instance: Instance, sample) -> ObjectivePoint:
    """Sample-average work overload and reinsertion objectives of ``solution``."""
    return Evaluator(instance, sample.scenarios).evaluate(solution)


def delta_evaluate(solution: Solution, instance: Instance, sample, move: Move) -> ObjectivePoint:
    """Objectives after ``move`` using partial re-sweeps from cached state."""
    ev = Evaluator(instance, sample.scenarios)
    return ev.trial(solution, move).point(ev.N)


def sequence_overload(tokens: Sequence[int], instance: Instance) -> int:
    """Total overload (tenths) of a token sequence over all stations.

    Negative tokens ``~gid`` are neutral vehicles.
    """
    c = instance.cycle
    total = 0
    for k, lk in enumerate(instance.lengths):
        b = [instance.loads[g][k] if g >= 0 else c for g in tokens]
        total += station_overload(b, lk, c)[1]
    return total
