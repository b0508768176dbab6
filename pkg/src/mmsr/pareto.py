"""Dominance relations and the external population."""

from __future__ import annotations

from typing import Iterable, List, Sequence, Tuple


def pareto_dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """``a`` is no worse in every objective and better in at least one."""
    better = False
    for x, y in zip(a, b):
        if x > y:
            return False
        if x < y:
            better = True
    return better


def weakly_dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    return all(x <= y for x, y in zip(a, b))


def constrained_dominates(a, b) -> bool:
    """Constrained domination between two evaluated solutions.

    Feasible beats infeasible; among infeasible, lower violation degree
    wins and equal degrees fall back to Pareto dominance.
    """
    va, vb = a.violation_degree, b.violation_degree
    if va == 0 and vb > 0:
        return True
    if va > 0 and vb == 0:
        return False
    if va > 0 and va != vb:
        return va < vb
    return pareto_dominates(a.key, b.key)


def nondominated_points(points: Iterable[Tuple[float, float]]) -> List[Tuple[float, float]]:
    """Distinct non-dominated 2-D points, sorted by the first objective."""
    out = []
    best_second = None
    for p in sorted(set(points)):
        if best_second is None or p[1] < best_second:
            out.append(p)
            best_second = p[1]
    return out


def update_external_population(ep: list, candidates: Iterable) -> list:
    """Merge feasible candidates into a non-dominated archive.

    Candidates dominated by (or objective-equal to) an archive member are
    skipped; archive members dominated by an insert are dropped.
    """
    ep = list(ep)
    for cand in candidates:
        if cand.violation_degree:
            continue
        k = cand.key
        if any(m.key == k or pareto_dominates(m.key, k) for m in ep):
            continue
        ep = [m for m in ep if not pareto_dominates(k, m.key)]
        ep.append(cand)
    ep.sort(key=lambda m: m.key)
    return ep
