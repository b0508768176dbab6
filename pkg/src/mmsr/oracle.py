"""Exhaustive reference for tiny instances.

Everything here is written from the problem rules directly and shares no
code with the evaluator, feasibility or search modules, so agreement
between the two is meaningful.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .instances import ScenarioSample
from .model import SKIP, Instance, Solution, fmt_tu

MAX_VEHICLES = 7
MAX_FAILED = 3
MAX_SCENARIOS = 8
MAX_POSITIONS = 6


class OracleLimitError(ValueError):
    pass


@dataclass(frozen=True)
class FrontPoint:
    wo_sum: int  # tenths of TU summed over the sample
    re_sum: int
    witness: Solution

    def obj(self, n_scenarios: int) -> Tuple[float, float]:
        return self.wo_sum / (10 * n_scenarios), self.re_sum / n_scenarios


# ---------------------------------------------------------------------------
# overload by exhaustive search
# ---------------------------------------------------------------------------

def reference_overload(loads: Sequence[int], length: int, cycle: int) -> int:
    """Minimum total overload (tenths) over every feasible (z, w) schedule.

    The start offset ``z`` and the overload ``w`` of each position range
    over the 0.1 TU grid. A position must finish inside the station
    (``z + b - w <= l``), the next start is at least the spill-over
    ``z + b - w - c``, and the last position must leave the station empty
    for the next cycle (``z + b - w <= c``). The search is a dynamic
    program over reachable start offsets, minimizing the overload spent
    to reach each one.
    """
    if len(loads) > MAX_POSITIONS:
        raise OracleLimitError(f"reference_overload handles at most {MAX_POSITIONS} positions")
    if any(b < 0 for b in loads):
        raise ValueError("loads must be non-negative")
    if not loads:
        return 0
    big = np.iinfo(np.int64).max // 4
    # an offset beyond the station length can only add overload
    zmax = length
    cost = np.full(zmax + 1, big, dtype=np.int64)
    cost[0] = 0
    last = len(loads) - 1
    # each schedule step is indexed by the offset z and the work u = z + b - w
    # kept inside the station; every (z, u) pair of the grid is enumerated
    u = np.arange(length + 1)[None, :]
    for t, b in enumerate(loads):
        zs = np.flatnonzero(cost < big)
        z = zs[:, None]
        w = z + b - u
        ok = w >= 0
        total = np.where(ok, cost[zs][:, None] + w, big)
        if t == last:
            return int(total[:, :cycle + 1].min())
        # the next start may be anything from the spill-over up to zmax
        start = np.broadcast_to(np.maximum(u - cycle, 0), total.shape)
        best = np.full(zmax + 1, big, dtype=np.int64)
        np.minimum.at(best, start[ok], total[ok])
        cost = np.minimum.accumulate(best)
    raise AssertionError("unreachable")


# ---------------------------------------------------------------------------
# independent evaluation of one scenario
# ---------------------------------------------------------------------------

def _final_order(first_stage: Sequence[int], exist: Sequence[bool], plan: Dict[int, int],
                 n: int) -> List[Tuple[int, bool]]:
    """Place each vehicle by position arithmetic.

    A survivor originally at ``p`` moves to ``p`` minus the failures ahead
    of it plus the inserts targeting ``t <= p``. An insert at ``t`` lands
    after every survivor originally before ``t`` and after the inserts
    ranked ahead of it by ``(t, gid)``.
    """
    inserts = sorted((t, g) for g, t in plan.items() if t != SKIP)
    skipped = sorted(g for g, t in plan.items() if t == SKIP)
    size = sum(1 for v in range(n) if exist[v]) + len(inserts) + len(skipped)
    slots: List = [None] * size
    failures_before = 0
    for p, v in enumerate(first_stage, 1):
        if not exist[v]:
            failures_before += 1
            continue
        ins = sum(1 for t, _ in inserts if t <= p)
        slots[p - failures_before + ins - 1] = (v, False)
    for rank, (t, g) in enumerate(inserts):
        survivors_before = sum(1 for p, v in enumerate(first_stage, 1) if p < t and exist[v])
        slots[survivors_before + rank] = (g, False)
    base = size - len(skipped)
    for k, g in enumerate(skipped):
        slots[base + k] = (g, True)
    assert all(s is not None for s in slots)
    return slots


def _overload(order: Sequence[Tuple[int, bool]], instance: Instance) -> int:
    c = instance.cycle
    total = 0
    for k, st in enumerate(instance.stations):
        z = 0
        for i, (g, neutral) in enumerate(order):
            b = c if neutral else _load(instance, g, k)
            if i == len(order) - 1:
                total += max(0, z + b - c)
            else:
                w = max(0, z + b - st.length)
                total += w
                z = max(0, z + b - w - c)
    return total


def _load(instance: Instance, g: int, k: int) -> int:
    n = len(instance.vehicles)
    if g < n:
        return instance.vehicles[g].processing_times[k]
    return instance.old_pool[g - n].vehicle.processing_times[k]


def _failed(instance: Instance, exist, old_present) -> List[int]:
    n = len(instance.vehicles)
    return [v for v in range(n) if not exist[v]] + [n + j for j in sorted(old_present)]


def _window_clash(targets: Sequence[int], n: int, lam: int) -> bool:
    for s in range(1, n - lam + 2):
        if sum(1 for t in targets if s <= t <= s + lam - 1) > 1:
            return True
    return False


def feasible_plans(instance: Instance, first_stage: Sequence[int], exist,
                   old_present) -> List[Dict[int, int]]:
    """Every plan meeting ready, due, f_max and lambda rules (depth-first, lambda-pruned)."""
    n = len(instance.vehicles)
    pos = {v: p for p, v in enumerate(first_stage, 1)}
    failed = _failed(instance, exist, old_present)
    options = []
    for g in failed:
        if g < n:
            lo = min(n, pos[g] + instance.vehicles[g].ready_offset)
            may_skip = True
        else:
            old = instance.old_pool[g - n]
            lo = max(1, old.vehicle.ready_offset)
            may_skip = old.wait_days != old.slack_days
        opts = ([SKIP] if may_skip else []) + list(range(lo, n + 1))
        options.append(opts)
    out = []

    def dfs(i, chosen, skips):
        if skips > instance.f_max:
            return
        targets = [t for t in chosen if t != SKIP]
        if _window_clash(targets, n, instance.lam):
            return
        if i == len(failed):
            out.append(dict(zip(failed, chosen)))
            return
        for t in options[i]:
            dfs(i + 1, chosen + [t], skips + (t == SKIP))

    dfs(0, [], 0)
    return out


def _penalty(instance: Instance, g: int) -> int:
    n = len(instance.vehicles)
    wait = 0 if g < n else instance.old_pool[g - n].wait_days
    return (wait + 1) ** 2


def _nondominated(points: Dict[Tuple[int, int], object]) -> Dict[Tuple[int, int], object]:
    out = {}
    best_re = None
    for key in sorted(points):
        if best_re is None or key[1] < best_re:
            out[key] = points[key]
            best_re = key[1]
    return out


def enumerate_pareto(instance: Instance, sample: ScenarioSample) -> List[FrontPoint]:
    """Exact front of ``(wo_sum, re_sum)`` with one witness per point.

    For each permutation, every scenario's feasible plans are reduced to
    their non-dominated ``(wo, re)`` pairs; the scenario sets are then
    combined by pairwise sums, pruning dominated partial sums, and the
    permutation fronts are merged.
    """
    n = len(instance.vehicles)
    scen = sample.scenarios
    if n > MAX_VEHICLES:
        raise OracleLimitError(f"oracle handles at most {MAX_VEHICLES} vehicles")
    if len(scen) > MAX_SCENARIOS:
        raise OracleLimitError(f"oracle handles at most {MAX_SCENARIOS} scenarios")
    for s in scen:
        if len(_failed(instance, s.exist_mask, s.old_present)) > MAX_FAILED:
            raise OracleLimitError(f"oracle handles at most {MAX_FAILED} failed vehicles per scenario")
    front: Dict[Tuple[int, int], object] = {}
    for perm in itertools.permutations(range(n)):
        # partial sums -> chosen plans so far
        acc: Dict[Tuple[int, int], tuple] = {(0, 0): ()}
        for s in scen:
            local: Dict[Tuple[int, int], dict] = {}
            for plan in feasible_plans(instance, perm, s.exist_mask, s.old_present):
                order = _final_order(perm, s.exist_mask, plan, n)
                key = (_overload(order, instance),
                       sum(_penalty(instance, g) for g, t in plan.items() if t == SKIP))
                local.setdefault(key, plan)
            if not local:
                acc = {}
                break
            local = _nondominated(local)
            merged: Dict[Tuple[int, int], tuple] = {}
            for (a, b), plans in acc.items():
                for (x, y), plan in local.items():
                    merged.setdefault((a + x, b + y), plans + (plan,))
            acc = _nondominated(merged)
        for key, plans in acc.items():
            if key not in front:
                front[key] = (perm, plans)
        front = _nondominated(front)
    N = len(scen)
    return [FrontPoint(k[0], k[1], Solution(list(perm), [dict(p) for p in plans], N, k[0], k[1], 0,
                                            None, True))
            for k, (perm, plans) in sorted(front.items())]


def write_front(points: Sequence[FrontPoint], n_scenarios: int, path) -> None:
    """CSV rows ``wo, re, first_stage, plans`` with vehicle indices from 0."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["wo", "re", "first_stage", "plans"])
        for p in points:
            wo, re = p.obj(n_scenarios)
            plans = "|".join(";".join(f"{g}:{t}" for g, t in sorted(pl.items()))
                             for pl in p.witness.plans)
            wr.writerow([fmt_tu(round(wo * 10)), f"{re:.6g}",
                         " ".join(map(str, p.witness.first_stage)), plans])
