"""Reinsertion rules: being-ready bounds, lambda spacing, f_max and due vehicles.

Ready bounds, f_max and the due rule are hard; lambda spacing is the one
soft rule, and the number of violated lambda-windows is the violation
degree used by constrained domination.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence

from .model import SKIP, ContractViolation, Instance, ReinsertionPlan, Scenario, Solution


@dataclass(frozen=True)
class FeasibilityReport:
    lambda_violations: int = 0
    fmax_excess: int = 0
    due_misses: int = 0
    ready_violations: int = 0

    @property
    def hard_ok(self) -> bool:
        return self.fmax_excess == 0 and self.due_misses == 0 and self.ready_violations == 0

    @property
    def ok(self) -> bool:
        return self.hard_ok and self.lambda_violations == 0


def positions_of(first_stage: Sequence[int]) -> List[int]:
    pos = [0] * len(first_stage)
    for p, v in enumerate(first_stage, 1):
        pos[v] = p
    return pos


def ready_bound(instance: Instance, gid: int, pos: Sequence[int]) -> int:
    """Earliest first-stage position ``gid`` may be reinserted at."""
    n = instance.n
    if gid < n:
        return min(n, pos[gid] + instance.ready_offsets[gid])
    return max(1, instance.ready_offsets[gid])


def ready_lower_bound(gid: int, scenario: Scenario, first_stage: Sequence[int],
                      instance: Instance) -> int:
    if gid not in scenario.failed(instance.n):
        raise ContractViolation(f"vehicle {gid} did not fail in this scenario")
    return ready_bound(instance, gid, positions_of(first_stage))


def lambda_violations(targets: Iterable[int], n: int, lam: int) -> int:
    """Number of windows ``[t, t+lam-1]``, ``t = 1..n-lam+1``, holding two or more targets."""
    ts = sorted(targets)
    if len(ts) < 2 or lam < 2 and len(set(ts)) == len(ts):
        return 0
    last_start = n - lam + 1
    count = 0
    covered_to = 0
    for a, b in zip(ts, ts[1:]):
        if b - a > lam - 1:
            continue
        lo = max(1, b - lam + 1, covered_to + 1)
        hi = min(a, last_start)
        if hi >= lo:
            count += hi - lo + 1
            covered_to = hi
    return count


def lambda_free(t: int, others: Iterable[int], lam: int, n: int) -> bool:
    """True when a target at ``t`` shares no window with any of ``others``."""
    if lam > n:
        return True
    for u in others:
        if abs(u - t) < lam:
            return False
    return True


def random_position(gid: int, bound: int, others: Sequence[int], instance: Instance,
                    rng, tabu=None) -> Optional[int]:
    """Uniform ready and lambda-free target for ``gid``, avoiding tabu pairs when possible."""
    n, lam = instance.n, instance.lam
    if others and lam <= n:
        free = [True] * (n + 1)
        for u in others:
            for t in range(max(bound, u - lam + 1), min(n, u + lam - 1) + 1):
                free[t] = False
        cands = [t for t in range(bound, n + 1) if free[t]]
    else:
        cands = list(range(bound, n + 1))
    if not cands:
        return None
    if tabu is not None:
        allowed = [t for t in cands if tabu.allows((gid, t))]
        if allowed:
            cands = allowed
    return rng.choice(cands)


def check_plan(plan: ReinsertionPlan, scenario: Scenario, first_stage: Sequence[int],
               instance: Instance) -> FeasibilityReport:
    n = instance.n
    pos = positions_of(first_stage)
    targets = [t for t in plan.values() if t != SKIP]
    skips = sum(1 for t in plan.values() if t == SKIP)
    due = sum(1 for g, t in plan.items() if t == SKIP and instance.is_due(g))
    ready = sum(1 for g, t in plan.items()
                if t != SKIP and not ready_bound(instance, g, pos) <= t <= n)
    return FeasibilityReport(
        lambda_violations=lambda_violations(targets, n, instance.lam),
        fmax_excess=max(0, skips - instance.f_max),
        due_misses=due,
        ready_violations=ready,
    )


def enhance(plan: ReinsertionPlan, scenario: Scenario, first_stage: Sequence[int],
            instance: Instance, rng, tabu=None, pos: Optional[Sequence[int]] = None
            ) -> ReinsertionPlan:
    """Best-effort repair of a reinsertion plan.

    Ready violations are resampled, due vehicles and any f_max excess are
    placed at the earliest lambda-free positions, then at the positions
    adding the fewest violated windows, and finally single-vehicle moves
    reduce the remaining lambda violations. ``pos`` may pass precomputed
    first-stage positions.
    """
    n, lam, f_max = instance.n, instance.lam, instance.f_max
    if pos is None:
        pos = positions_of(first_stage)
    failed = scenario.failed(n)
    plan = {g: plan.get(g, SKIP) for g in failed}
    bound = {g: ready_bound(instance, g, pos) for g in failed}
    if _already_feasible(plan, bound, instance):
        return plan

    def others(g):
        return [t for h, t in plan.items() if h != g and t != SKIP]

    # (a) ready violations
    for g in failed:
        t = plan[g]
        if t != SKIP and not bound[g] <= t <= n:
            new = random_position(g, bound[g], others(g), instance, rng, tabu)
            plan[g] = SKIP if new is None else new

    def pending():
        skipped = [g for g in failed if plan[g] == SKIP]
        due = [g for g in skipped if due_flags[g]]
        return skipped, due, max(0, len(skipped) - f_max)

    due_flags, penalties = instance.due_flags, instance.penalties

    def pick(cands):
        # due first, then the largest waiting penalty, then lowest gid
        return min(cands, key=lambda g: (not due_flags[g], -penalties[g], g))

    # (b) earliest lambda-free positions, scanning left to right
    skipped, due, excess = pending()
    if due or excess:
        for t in range(1, n + 1):
            if not (due or excess):
                break
            occupied = [u for u in plan.values() if u != SKIP]
            if not lambda_free(t, occupied, lam, n):
                continue
            cands = [g for g in due if bound[g] <= t]
            if not cands and excess:
                cands = [g for g in skipped if bound[g] <= t]
            if not cands:
                continue
            plan[pick(cands)] = t
            skipped, due, excess = pending()

    # (c) place what is left at the least-violating positions
    while due or excess:
        g = pick(due if due else skipped)
        occ = others(g)
        best = min(range(bound[g], n + 1),
                   key=lambda t: (lambda_violations(occ + [t], n, lam), t))
        plan[g] = best
        skipped, due, excess = pending()

    # (d) single-vehicle moves reducing lambda violations
    while True:
        targets = [t for t in plan.values() if t != SKIP]
        current = lambda_violations(targets, n, lam)
        if current == 0:
            break
        best = None
        for g in failed:
            if plan[g] == SKIP:
                continue
            occ = others(g)
            for t in range(bound[g], n + 1):
                if t == plan[g]:
                    continue
                v = lambda_violations(occ + [t], n, lam)
                if v < current and (best is None or (v, g, t) < best):
                    best = (v, g, t)
        if best is None:
            break
        plan[best[1]] = best[2]
    return plan


def _already_feasible(plan, bound, instance) -> bool:
    due = instance.due_flags
    skips = 0
    targets = []
    for g, t in plan.items():
        if t == SKIP:
            if due[g]:
                return False
            skips += 1
        elif t < bound[g] or t > instance.n:
            return False
        else:
            targets.append(t)
    return skips <= instance.f_max and lambda_violations(targets, instance.n, instance.lam) == 0


def violation_degree(solution: Solution, instance: Instance) -> int:
    """Total violated lambda-windows over all scenario plans."""
    return sum(lambda_violations([t for t in p.values() if t != SKIP], instance.n, instance.lam)
               for p in solution.plans)


def plan_reports(solution: Solution, scenarios: Sequence[Scenario],
                 instance: Instance) -> List[FeasibilityReport]:
    return [check_plan(p, sc, solution.first_stage, instance)
            for p, sc in zip(solution.plans, scenarios)]
