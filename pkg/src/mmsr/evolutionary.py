"""NSGA-II and its local-search hybrid for the two-stage problem.

A chromosome is a :class:`~mmsr.model.Solution`: part one is the
first-stage permutation, part two holds one gene per failed vehicle and
scenario, mapping the vehicle to 0 (not reinserted) or its target.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

from .evaluator import Evaluator
from .feasibility import enhance, positions_of, random_position, ready_bound
from .instances import ScenarioSample
from .model import SKIP, ReinsertionPlan, Solution
from .pareto import constrained_dominates, pareto_dominates, update_external_population
from .search import (
    Budget,
    Clock,
    OperatorWeights,
    TabuList,
    improve_second_stage,
    insert_all_plan,
    naive_greedy,
    random_plan,
    skip_all_plan,
    utilization_greedy,
    warm_start,
)

__all__ = [
    "EaConfig", "pmx_single_point", "uniform_reinsertion_crossover", "mutate_first_stage",
    "mutate_second_stage", "constrained_dominates", "fast_nondominated_sort",
    "crowding_distance", "nsga2", "ls_nsga2", "update_external_population",
]


@dataclass
class EaConfig:
    population: int = 40
    mutation_prob: float = 0.1
    tau_s: float = 0.05
    tau_s_iters: int = 2
    budget: Budget = field(default_factory=lambda: Budget(10_000, "it"))
    seed: int = 0
    warmup_share: float = 0.05
    weights: OperatorWeights = field(default_factory=OperatorWeights)

    def __post_init__(self):
        if self.population < 4 or self.population % 2:
            raise ValueError("population size must be even and at least 4")
        if not 0.0 <= self.mutation_prob <= 1.0:
            raise ValueError("mutation probability must lie in [0, 1]")


def pmx_single_point(parent1: Sequence[int], parent2: Sequence[int], cut: int) -> List[int]:
    """Head of ``parent1`` up to ``cut``, remaining vehicles in ``parent2`` order."""
    head = list(parent1[:cut])
    taken = set(head)
    return head + [v for v in parent2 if v not in taken]


def uniform_reinsertion_crossover(plan1: ReinsertionPlan, plan2: ReinsertionPlan, w: int,
                                  first_stage: Sequence[int], ev: Evaluator, rng: random.Random,
                                  tabu: Optional[TabuList] = None,
                                  pos: Optional[Sequence[int]] = None) -> ReinsertionPlan:
    """Uniform crossover on the binary decisions; targets are drawn afresh."""
    if not ev.failed[w]:
        return {}
    inst = ev.instance
    if pos is None:
        pos = positions_of(first_stage)
    child = {}
    for g in ev.failed[w]:
        d1 = plan1[g] != SKIP
        d2 = plan2[g] != SKIP
        insert = d1 if d1 == d2 else (d2 if rng.random() > 0.5 else d1)
        t = SKIP
        if insert:
            others = [u for u in child.values() if u != SKIP]
            t = random_position(g, ready_bound(inst, g, pos), others, inst, rng, tabu)
            t = SKIP if t is None else t
        child[g] = t
    return enhance(child, ev.scenarios[w], first_stage, inst, rng, tabu, pos)


def mutate_first_stage(seq: Sequence[int], rng: random.Random) -> List[int]:
    """Reverse a random subsequence of at least two positions."""
    i, j = sorted(rng.sample(range(len(seq)), 2))
    out = list(seq)
    out[i:j + 1] = out[i:j + 1][::-1]
    return out


def mutate_second_stage(solution: Solution, mutation_prob: float, ev: Evaluator,
                        rng: random.Random, tabu: Optional[TabuList] = None) -> bool:
    """Flip one random gene of one random scenario with probability ``mutation_prob``.

    Returns True when the chromosome changed; its objectives are then stale.
    """
    if rng.random() >= mutation_prob:
        return False
    scenarios = [w for w in range(ev.N) if ev.failed[w]]
    if not scenarios:
        return False
    w = rng.choice(scenarios)
    g = rng.choice(ev.failed[w])
    plan = dict(solution.plans[w])
    inst = ev.instance
    if plan[g] == SKIP:
        pos = positions_of(solution.first_stage)
        others = [u for u in plan.values() if u != SKIP]
        t = random_position(g, ready_bound(inst, g, pos), others, inst, rng, tabu)
        if t is None:
            return False
        plan[g] = t
    else:
        plan[g] = SKIP
    solution.plans[w] = enhance(plan, ev.scenarios[w], solution.first_stage, inst, rng, tabu)
    solution.evaluated = False
    solution.states = None
    return True


def fast_nondominated_sort(population: Sequence, dominates=None) -> List[List[int]]:
    """Partition indices of ``population`` into successive non-dominated fronts.

    The default relation is constrained domination. Because any lower
    violation degree dominates any higher one, members are grouped by
    degree and each group is split into 2-objective fronts by a sweep
    over ``(wo, re)``. A custom ``dominates`` uses the generic pairwise
    procedure instead.
    """
    if dominates is not None:
        return _pairwise_sort(population, dominates)
    groups = {}
    for i, s in enumerate(population):
        groups.setdefault(s.violation_degree, []).append(i)
    fronts: List[List[int]] = []
    for degree in sorted(groups):
        members = sorted(groups[degree], key=lambda i: (population[i].key, i))
        local: List[List[int]] = []
        tails = []  # key of the last member of each local front
        for i in members:
            k = population[i].key
            for f, tail in enumerate(tails):
                # tail has the smallest re in its front and wo <= k's wo
                if not (tail[1] <= k[1] and tail != k):
                    local[f].append(i)
                    tails[f] = k
                    break
            else:
                local.append([i])
                tails.append(k)
        fronts.extend(sorted(f) for f in local)
    return fronts


def _pairwise_sort(population: Sequence, dominates) -> List[List[int]]:
    n = len(population)
    dominated_by = [[] for _ in range(n)]
    counts = [0] * n
    for i in range(n):
        for j in range(i + 1, n):
            if dominates(population[i], population[j]):
                dominated_by[i].append(j)
                counts[j] += 1
            elif dominates(population[j], population[i]):
                dominated_by[j].append(i)
                counts[i] += 1
    fronts = []
    current = [i for i in range(n) if counts[i] == 0]
    while current:
        fronts.append(current)
        nxt = []
        for i in current:
            for j in dominated_by[i]:
                counts[j] -= 1
                if counts[j] == 0:
                    nxt.append(j)
        current = sorted(nxt)
    return fronts


def crowding_distance(points: Sequence[Sequence[float]]) -> List[float]:
    n = len(points)
    if n == 0:
        return []
    dist = [0.0] * n
    for m in range(len(points[0])):
        order = sorted(range(n), key=lambda i: (points[i][m], i))
        lo, hi = points[order[0]][m], points[order[-1]][m]
        dist[order[0]] = dist[order[-1]] = math.inf
        span = hi - lo
        if span == 0:
            continue
        for a in range(1, n - 1):
            i = order[a]
            dist[i] += (points[order[a + 1]][m] - points[order[a - 1]][m]) / span
    return dist


def _select(merged: List[Solution], size: int) -> List[Solution]:
    chosen: List[Solution] = []
    for front in fast_nondominated_sort(merged):
        if len(chosen) + len(front) <= size:
            chosen.extend(merged[i] for i in front)
            continue
        cd = crowding_distance([merged[i].key for i in front])
        ranked = sorted(range(len(front)), key=lambda a: (-cd[a], a))
        chosen.extend(merged[front[a]] for a in ranked[:size - len(chosen)])
        break
    return chosen


def _initial_population(ev: Evaluator, config: EaConfig, rng: random.Random, clock: Clock,
                        tabu: TabuList, improve: bool) -> List[Solution]:
    inst = ev.instance
    P = config.population
    firsts = [utilization_greedy(inst)] + [naive_greedy(inst, rng) for _ in range(P - 1)]
    if improve:
        warm = clock.fraction(config.warmup_share)
        share = warm.max_iters // P if warm.iterative else None
        for i in range(P):
            sub = warm.sub(share, warm.max_seconds / P if share is None else 0.0)
            firsts[i] = warm_start(inst, firsts[i], sub, config.weights, rng)
    pop = []
    for i, fs in enumerate(firsts):
        if i == 0:
            plans = [skip_all_plan(fs, w, ev, rng, tabu) for w in range(ev.N)]
        elif i == 1:
            plans = [insert_all_plan(fs, w, ev, rng, tabu) for w in range(ev.N)]
        else:
            plans = [random_plan(fs, w, ev, rng, tabu) for w in range(ev.N)]
        sol = Solution(fs, plans, ev.N)
        ev.evaluate(sol)
        clock.tick()
        pop.append(sol)
    return pop


def _make_child(p1: Solution, p2: Solution, ev: Evaluator, config: EaConfig,
                rng: random.Random, tabu: TabuList) -> Solution:
    n = ev.n
    fs = pmx_single_point(p1.first_stage, p2.first_stage, rng.randint(1, n - 1))
    if rng.random() < config.mutation_prob:
        fs = mutate_first_stage(fs, rng)
    pos = positions_of(fs)
    plans = [uniform_reinsertion_crossover(p1.plans[w], p2.plans[w], w, fs, ev, rng, tabu, pos)
             for w in range(ev.N)]
    child = Solution(fs, plans, ev.N)
    mutate_second_stage(child, config.mutation_prob, ev, rng, tabu)
    ev.evaluate(child)
    return child


def _run(instance, sample: ScenarioSample, config: EaConfig, local_search: bool):
    rng = random.Random(config.seed)
    ev = Evaluator(instance, sample.scenarios)
    clock = config.budget.start()
    tabu = TabuList(2 * instance.lam)
    P = config.population
    pop = _initial_population(ev, config, rng, clock, tabu, local_search)
    ep = update_external_population([], pop) if local_search else []
    if instance.n < 2:
        return pop, ep
    while not clock.done():
        children = []
        for _ in range(P):
            if clock.done():
                break
            a, b = rng.sample(range(len(pop)), 2)
            child = _make_child(pop[a], pop[b], ev, config, rng, tabu)
            clock.tick()
            if local_search:
                # the child counts as one iteration and each second-stage move as one more
                pos = positions_of(child.first_stage)
                for w in range(ev.N):
                    if not any(t != SKIP for t in child.plans[w].values()):
                        continue
                    sub = clock.sub(config.tau_s_iters, config.tau_s)
                    improve_second_stage(child, w, ev, sub, rng, tabu, pos)
            children.append(child)
        merged = pop + children
        pop = _select(merged, P)
        if local_search:
            ep = update_external_population(ep, [_strip(s) for s in merged
                                                 if s.violation_degree == 0])
    return pop, ep


def _strip(sol: Solution) -> Solution:
    return Solution(list(sol.first_stage), [dict(p) for p in sol.plans], sol.n_scenarios,
                    sol.wo_sum, sol.re_sum, sol.violation_degree, None, True)


def _first_front(pop: List[Solution]) -> List[Solution]:
    feasible = [s for s in pop if s.violation_degree == 0]
    front = []
    seen = set()
    for s in sorted(feasible, key=lambda s: s.key):
        if s.key in seen or any(pareto_dominates(o.key, s.key) for o in feasible):
            continue
        seen.add(s.key)
        front.append(_strip(s))
    return front


def nsga2(instance, sample: ScenarioSample, config: Optional[EaConfig] = None) -> List[Solution]:
    """Plain NSGA-II; returns the feasible first front of the last generation."""
    config = config or EaConfig()
    pop, _ = _run(instance, sample, config, local_search=False)
    return _first_front(pop)


def ls_nsga2(instance, sample: ScenarioSample, config: Optional[EaConfig] = None) -> List[Solution]:
    """NSGA-II with one-scenario warm starts, per-child second-stage search and
    an unbounded external population, which is returned."""
    config = config or EaConfig(population=16)
    _, ep = _run(instance, sample, config, local_search=True)
    return ep
