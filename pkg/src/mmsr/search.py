"""Transformation operators, constructive heuristics and the two-stage local search."""

from __future__ import annotations

import random
import re
import time
from collections import deque
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

from .evaluator import Evaluator, Move
from .feasibility import enhance, positions_of, random_position, ready_bound
from .instances import ScenarioSample, one_scenario_sample
from .model import SKIP, ContractViolation, Instance, Solution
from .pareto import update_external_population

OPERATORS = ("swap", "insert_fwd", "insert_back", "inversion")


# ---------------------------------------------------------------------------
# budgets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Budget:
    """Run length in wall-clock seconds or in evaluated moves ("iterations")."""
    amount: float
    unit: str = "it"

    @classmethod
    def parse(cls, text: str) -> "Budget":
        m = re.fullmatch(r"\s*(\d+(?:\.\d+)?)\s*(it|s)\s*", str(text))
        if not m:
            raise ValueError(f"budget must look like '2000it' or '60s', got {text!r}")
        amount = float(m.group(1))
        return cls(int(amount) if m.group(2) == "it" else amount, m.group(2))

    @property
    def iterative(self) -> bool:
        return self.unit == "it"

    def start(self) -> "Clock":
        if self.iterative:
            return Clock(max_iters=int(self.amount))
        return Clock(max_seconds=float(self.amount))

    def __str__(self) -> str:
        return f"{self.amount:g}{self.unit}"


class Clock:
    """Counts evaluated moves; sub-clocks also charge their parent unless
    created with ``charge=False``."""

    def __init__(self, max_iters=None, max_seconds=None, parent=None, charge=True):
        self.max_iters = max_iters
        self.max_seconds = max_seconds
        self.parent = parent
        self.charge = charge
        self.iters = 0
        self.t0 = time.perf_counter()

    @property
    def iterative(self) -> bool:
        if self.max_iters is not None and self.max_seconds is None:
            return True
        if self.max_seconds is not None:
            return False
        return self.parent.iterative if self.parent is not None else True

    def done(self) -> bool:
        if self.max_iters is not None and self.iters >= self.max_iters:
            return True
        if self.max_seconds is not None and time.perf_counter() - self.t0 >= self.max_seconds:
            return True
        return self.parent is not None and self.parent.done()

    def tick(self) -> None:
        self.iters += 1
        if self.parent is not None and self.charge:
            self.parent.tick()

    def sub(self, iters: int, seconds: float, charge: bool = True) -> "Clock":
        if self.iterative:
            return Clock(max_iters=iters, parent=self, charge=charge)
        return Clock(max_seconds=seconds, parent=self, charge=charge)

    def fraction(self, share: float) -> "Clock":
        if self.iterative:
            return Clock(max_iters=int(self.max_iters * share), parent=self)
        return Clock(max_seconds=self.max_seconds * share, parent=self)


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OperatorWeights:
    swap: float = 0.35
    insert_forward: float = 0.25
    insert_backward: float = 0.25
    inversion: float = 0.15

    def __post_init__(self):
        ws = self.as_tuple()
        if any(w < 0 for w in ws) or abs(sum(ws) - 1.0) > 1e-9:
            raise ValueError(f"operator weights must be non-negative and sum to 1, got {ws}")

    def as_tuple(self):
        return (self.swap, self.insert_forward, self.insert_backward, self.inversion)


def apply_operator(seq: Sequence[int], op: str, i: int, j: int) -> List[int]:
    """Apply one transformation operator at 1-based positions ``i`` and ``j``."""
    n = len(seq)
    if not (1 <= i <= n and 1 <= j <= n) or i == j:
        raise ContractViolation(f"positions ({i}, {j}) invalid for length {n}")
    out = list(seq)
    a, b = i - 1, j - 1
    if op == "swap":
        out[a], out[b] = out[b], out[a]
    elif op == "insert_fwd":
        if i > j:
            raise ContractViolation("forward insertion needs i < j")
        out.insert(b, out.pop(a))
    elif op == "insert_back":
        if i < j:
            raise ContractViolation("backward insertion needs i > j")
        out.insert(b, out.pop(a))
    elif op == "inversion":
        lo, hi = min(a, b), max(a, b)
        out[lo:hi + 1] = out[lo:hi + 1][::-1]
    else:
        raise ContractViolation(f"unknown operator {op!r}")
    return out


def random_operator(n: int, weights: OperatorWeights, rng: random.Random):
    op = rng.choices(OPERATORS, weights=weights.as_tuple())[0]
    i, j = rng.sample(range(1, n + 1), 2)
    if op == "insert_fwd" and i > j or op == "insert_back" and i < j:
        i, j = j, i
    return op, i, j


# ---------------------------------------------------------------------------
# constructive heuristics
# ---------------------------------------------------------------------------

def naive_greedy(instance: Instance, rng: random.Random) -> List[int]:
    """Random first vehicle, then least overload, then least idle time."""
    n = instance.n
    c = instance.cycle
    lengths = instance.lengths
    loads = instance.loads
    remaining = list(range(n))
    first = remaining.pop(rng.randrange(n))
    seq = [first]
    z = _advance((0,) * instance.n_stations, loads[first], lengths, c)
    while remaining:
        last = len(remaining) == 1
        best = None
        group = []
        for v in remaining:
            b = loads[v]
            w = 0
            idle = 0
            for zk, bk, lk in zip(z, b, lengths):
                x = zk + bk
                cap = c if last else lk
                if x > cap:
                    w += x - cap
                if x < c:
                    idle += c - x
            key = (w, idle)
            if best is None or key < best:
                best = key
                group = [v]
            elif key == best:
                group.append(v)
        v = rng.choice(group)
        remaining.remove(v)
        seq.append(v)
        z = _advance(z, loads[v], lengths, c)
    return seq


def _advance(z, b, lengths, c):
    out = []
    for zk, bk, lk in zip(z, b, lengths):
        x = min(zk + bk, lk)
        out.append(x - c if x > c else 0)
    return tuple(out)


def _bit_reversal_order(n: int) -> List[int]:
    bits = max(1, (n - 1).bit_length())
    order = []
    for i in range(1 << bits):
        r = int(format(i, f"0{bits}b")[::-1], 2)
        if r < n:
            order.append(r)
    return order


def utilization_greedy(instance: Instance) -> List[int]:
    """Spread vehicles by bottleneck utilization using bit-reversed ranks.

    Vehicles are ranked by ``max_k p_kv / c`` (descending, ties by index);
    rank ``m`` goes to the m-th bit-reversed position, interleaving heavy
    and light vehicles evenly.
    """
    n = instance.n
    c = instance.cycle
    ranked = sorted(range(n), key=lambda v: (-max(instance.loads[v]) / c, v))
    seq = [0] * n
    for v, p in zip(ranked, _bit_reversal_order(n)):
        seq[p] = v
    return seq


# ---------------------------------------------------------------------------
# tabu rule
# ---------------------------------------------------------------------------

def tabu_allows(history: Sequence, candidate, tenure: Optional[int] = None) -> bool:
    recent = list(history) if tenure is None else list(history)[-tenure:] if tenure else []
    return candidate not in recent


class TabuList:
    """Recently rejected (vehicle, position) reinsertion pairs."""

    def __init__(self, tenure: int):
        self.tenure = tenure
        self.history = deque(maxlen=max(tenure, 0))

    def allows(self, candidate) -> bool:
        return candidate not in self.history

    def reject(self, candidate) -> None:
        if self.tenure > 0:
            self.history.append(candidate)


# ---------------------------------------------------------------------------
# improvement procedures
# ---------------------------------------------------------------------------

def _first_stage_move(solution: Solution, ev: Evaluator, op, i, j, rng, tabu):
    """Neighbor first stage plus ready-repaired plans, or None if no repair exists."""
    inst = ev.instance
    n = ev.n
    fs = apply_operator(solution.first_stage, op, i, j)
    lo, hi = min(i, j), max(i, j)
    moved = set(fs[lo - 1:hi])
    pos = None
    plans = {}
    resampled = []
    for w, plan in enumerate(solution.plans):
        new_plan = None
        for g in ev.scenarios[w].failed_new:
            t = plan[g]
            if t == SKIP or g not in moved:
                continue
            if pos is None:
                pos = positions_of(fs)
            bound = min(n, pos[g] + inst.vehicles[g].ready_offset)
            if t >= bound:
                continue
            if new_plan is None:
                new_plan = dict(plan)
            others = [u for h, u in new_plan.items() if h != g and u != SKIP]
            t_new = random_position(g, bound, others, inst, rng, tabu)
            if t_new is None:
                return None, resampled
            new_plan[g] = t_new
            resampled.append((g, t_new))
        if new_plan is not None:
            plans[w] = new_plan
    return Move(fs, plans), resampled


def improve_first_stage(solution: Solution, ev: Evaluator, clock: Clock,
                        weights: OperatorWeights, rng: random.Random,
                        tabu: Optional[TabuList] = None) -> Solution:
    """Local search on the first stage accepting non-worsening work overload.

    Reinsertion targets that stop being ready after a move are resampled;
    a move whose plans cannot be repaired without a skip is rejected, so
    binary reinsertion decisions never change here.
    """
    ev.ensure(solution)
    n = ev.n
    if n < 2:
        return solution
    tabu = tabu if tabu is not None else TabuList(2 * ev.instance.lam)
    while not clock.done():
        clock.tick()
        op, i, j = random_operator(n, weights, rng)
        move, resampled = _first_stage_move(solution, ev, op, i, j, rng, tabu)
        if move is None:
            continue
        trial = ev.trial(solution, move)
        if trial.wo_sum <= solution.wo_sum and trial.violation_degree <= solution.violation_degree:
            ev.commit(solution, trial)
        else:
            for pair in resampled:
                tabu.reject(pair)
    return solution


def improve_second_stage(solution: Solution, w: int, ev: Evaluator, clock: Clock,
                         rng: random.Random, tabu: Optional[TabuList] = None,
                         pos: Optional[Sequence[int]] = None) -> Solution:
    """Local search over one scenario's reinsertion targets (swap and move)."""
    ev.ensure(solution)
    inst = ev.instance
    plan = solution.plans[w]
    inserted = sorted(g for g, t in plan.items() if t != SKIP)
    if not inserted:
        return solution
    tabu = tabu if tabu is not None else TabuList(2 * inst.lam)
    if pos is None:
        pos = positions_of(solution.first_stage)
    bound = {g: ready_bound(inst, g, pos) for g in inserted}
    while not clock.done():
        clock.tick()
        plan = solution.plans[w]
        if len(inserted) >= 2 and rng.random() < 0.5:
            g1, g2 = rng.sample(inserted, 2)
            t1, t2 = plan[g1], plan[g2]
            if t1 == t2 or t2 < bound[g1] or t1 < bound[g2]:
                continue
            new_plan = dict(plan)
            new_plan[g1], new_plan[g2] = t2, t1
            pair = (g1, t2)
        else:
            g = rng.choice(inserted)
            others = [u for h, u in plan.items() if h != g and u != SKIP]
            t_new = random_position(g, bound[g], others, inst, rng, tabu)
            if t_new is None or t_new == plan[g]:
                continue
            new_plan = dict(plan)
            new_plan[g] = t_new
            pair = (g, t_new)
        trial = ev.trial(solution, Move(None, {w: new_plan}))
        if trial.wo_sum <= solution.wo_sum and trial.violation_degree <= solution.violation_degree:
            ev.commit(solution, trial)
        else:
            tabu.reject(pair)
    return solution


# ---------------------------------------------------------------------------
# second-stage construction
# ---------------------------------------------------------------------------

def insert_all_plan(solution_fs: Sequence[int], w: int, ev: Evaluator, rng, tabu=None):
    """Every failed vehicle at a random ready, lambda-free target, then enhanced."""
    inst = ev.instance
    sc = ev.scenarios[w]
    pos = positions_of(solution_fs)
    plan = {}
    for g in ev.failed[w]:
        others = [u for u in plan.values() if u != SKIP]
        t = random_position(g, ready_bound(inst, g, pos), others, inst, rng, tabu)
        plan[g] = SKIP if t is None else t
    return enhance(plan, sc, solution_fs, inst, rng, tabu)


def skip_all_plan(solution_fs: Sequence[int], w: int, ev: Evaluator, rng, tabu=None):
    """No reinsertions beyond those the due and f_max rules force."""
    plan = {g: SKIP for g in ev.failed[w]}
    return enhance(plan, ev.scenarios[w], solution_fs, ev.instance, rng, tabu)


def random_plan(solution_fs: Sequence[int], w: int, ev: Evaluator, rng, tabu=None):
    inst = ev.instance
    pos = positions_of(solution_fs)
    plan = {}
    for g in ev.failed[w]:
        t = SKIP
        if rng.random() < 0.5:
            others = [u for u in plan.values() if u != SKIP]
            t = random_position(g, ready_bound(inst, g, pos), others, inst, rng, tabu)
            t = SKIP if t is None else t
        plan[g] = t
    return enhance(plan, ev.scenarios[w], solution_fs, inst, rng, tabu)


def flip_decision(solution: Solution, w: int, ev: Evaluator, rng, tabu=None) -> Optional[dict]:
    """Flip one random failed vehicle's Skip/Insert decision, keeping hard rules."""
    inst = ev.instance
    plan = solution.plans[w]
    skips = sum(1 for t in plan.values() if t == SKIP)
    pos = positions_of(solution.first_stage)
    options = []
    for g in ev.failed[w]:
        if plan[g] == SKIP:
            options.append(g)
        elif not inst.is_due(g) and skips + 1 <= inst.f_max:
            options.append(g)
    rng.shuffle(options)
    for g in options:
        new_plan = dict(plan)
        if plan[g] == SKIP:
            others = [u for u in plan.values() if u != SKIP]
            t = random_position(g, ready_bound(inst, g, pos), others, inst, rng, tabu)
            if t is None:
                continue
            new_plan[g] = t
        else:
            new_plan[g] = SKIP
        return new_plan
    return None


# ---------------------------------------------------------------------------
# STMLS
# ---------------------------------------------------------------------------

@dataclass
class StmlsConfig:
    theta: int = 10
    tau_f: float = 1.0
    tau_s: float = 0.05
    tau_f_iters: int = 50
    tau_s_iters: int = 5
    weights: OperatorWeights = field(default_factory=OperatorWeights)
    budget: Budget = field(default_factory=lambda: Budget(10_000, "it"))
    seed: int = 0
    warmup_share: float = 0.05
    reinsertion: bool = True

    def __post_init__(self):
        if self.theta < 1 or self.tau_f <= 0 or self.tau_s <= 0:
            raise ValueError("theta, tau_f and tau_s must be positive")
        if self.tau_f_iters < 1 or self.tau_s_iters < 1:
            raise ValueError("iteration phase lengths must be positive")


def warm_start(instance: Instance, first_stage: Sequence[int], clock: Clock,
               weights: OperatorWeights, rng: random.Random) -> List[int]:
    """Improve a first stage on the failure-free one-scenario problem."""
    one = Evaluator(instance, one_scenario_sample(instance).scenarios)
    sol = Solution(list(first_stage), [{}], 1)
    one.evaluate(sol)
    improve_first_stage(sol, one, clock, weights, rng)
    return sol.first_stage


def solve_one_scenario(instance: Instance, budget: Budget, seed: int = 0,
                       weights: Optional[OperatorWeights] = None) -> Solution:
    """Single-objective baseline: first-stage search ignoring failures."""
    rng = random.Random(seed)
    weights = weights or OperatorWeights()
    one = Evaluator(instance, one_scenario_sample(instance).scenarios)
    sol = Solution(utilization_greedy(instance), [{}], 1)
    one.evaluate(sol)
    improve_first_stage(sol, one, budget.start(), weights, rng)
    return sol


def stmls(instance: Instance, sample: ScenarioSample, config: StmlsConfig) -> List[Solution]:
    """Two-stage bi-objective local search; returns the external archive.

    With ``config.reinsertion`` off, every failed vehicle stays skipped and
    only the first stage is searched (the failures-without-reinsertion
    variant); the single resulting solution is returned.
    """
    rng = random.Random(config.seed)
    ev = Evaluator(instance, sample.scenarios)
    clock = config.budget.start()
    tabu = TabuList(2 * instance.lam)
    weights = config.weights

    fs = warm_start(instance, utilization_greedy(instance), clock.fraction(config.warmup_share),
                    weights, rng)
    if not config.reinsertion:
        sol = Solution(fs, [{g: SKIP for g in ev.failed[w]} for w in range(ev.N)], ev.N)
        ev.evaluate(sol)
        improve_first_stage(sol, ev, clock, weights, rng, tabu)
        return [_snapshot(sol)]

    plans = [insert_all_plan(fs, w, ev, rng, tabu) for w in range(ev.N)]
    sol = Solution(fs, plans, ev.N)
    ev.evaluate(sol)
    for w in range(ev.N):
        improve_second_stage(sol, w, ev, clock.sub(config.tau_s_iters, config.tau_s), rng, tabu)

    archive: List[Solution] = []
    iteration = 1
    # a single vehicle has no first-stage neighbors, so only the decision flips remain
    first_stage_moves = ev.n >= 2
    while not clock.done():
        if iteration % config.theta == 0 or not first_stage_moves:
            archive = update_external_population(archive, [_snapshot(sol)])
            for w in range(ev.N):
                clock.tick()
                new_plan = flip_decision(sol, w, ev, rng, tabu)
                if new_plan is not None:
                    ev.commit(sol, ev.trial(sol, Move(None, {w: new_plan})))
                improve_second_stage(sol, w, ev, clock.sub(config.tau_s_iters, config.tau_s),
                                     rng, tabu)
        else:
            improve_first_stage(sol, ev, clock.sub(config.tau_f_iters, config.tau_f),
                                weights, rng, tabu)
        iteration += 1
    return update_external_population(archive, [_snapshot(sol)])


def _snapshot(sol: Solution) -> Solution:
    return Solution(list(sol.first_stage), [dict(p) for p in sol.plans], sol.n_scenarios,
                    sol.wo_sum, sol.re_sum, sol.violation_degree, None, True)
