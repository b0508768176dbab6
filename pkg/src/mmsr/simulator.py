"""Dynamic reinsertion: replay a first-stage sequence on unseen failures.

The line walks the planned positions from left to right. A failed vehicle
becomes *reinstating* once its being-ready bound is reached; at each
position the first reinstating vehicle (oldest readiness first, then
lowest gid) whose insertion raises total overload by at most the threshold
is reinserted there, provided the position respects lambda spacing. At most
one vehicle is reinserted per position.
"""

from __future__ import annotations

import csv
import math
from functools import partial
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .evaluator import Evaluator, Move
from .feasibility import lambda_free, positions_of, ready_bound
from .instances import ScenarioSample, sample_scenarios
from .model import SKIP, Instance, Scenario, Solution, fmt_tu, tenths

DEFAULT_THRESHOLDS = (0.0, 3.0, 5.0, 10.0, 15.0, 30.0)


@dataclass(frozen=True)
class SimConfig:
    thresholds: Tuple[float, ...] = DEFAULT_THRESHOLDS
    n_test_scenarios: int = 50
    seed: int = 1_000_003

    def __post_init__(self):
        if any(t < 0 for t in self.thresholds):
            raise ValueError("thresholds must be non-negative")
        if self.n_test_scenarios < 1:
            raise ValueError("need at least one test scenario")


@dataclass(frozen=True)
class Insertion:
    vehicle: int  # vehicle id
    position: int
    delta_wo: float  # TU


@dataclass
class SimRun:
    wo: float
    re: float
    log: List[Insertion] = field(default_factory=list)

    @property
    def n_inserted(self) -> int:
        return len(self.log)


@dataclass(frozen=True)
class SimRow:
    variant: str
    threshold: float
    mean_obj_wo: float
    mean_obj_re: float


@dataclass
class SimRecord:
    variant: str
    solution: int
    scenario: int
    threshold: float
    run: SimRun


@dataclass
class SimResult:
    rows: List[SimRow]
    records: List[SimRecord] = field(default_factory=list)


def simulate_dynamic(first_stage: Sequence[int], scenario: Scenario, instance: Instance,
                     threshold: float) -> SimRun:
    """Greedy online reinsertion under a work-overload threshold (TU)."""
    n, lam = instance.n, instance.lam
    limit = math.inf if math.isinf(threshold) else tenths(threshold)
    ev = Evaluator(instance, [scenario])
    failed = ev.failed[0]
    sol = Solution(list(first_stage), [{g: SKIP for g in failed}], 1)
    ev.evaluate(sol)
    pos = positions_of(first_stage)
    bound = {g: ready_bound(instance, g, pos) for g in failed}
    log: List[Insertion] = []
    for p in range(1, n + 1):
        plan = sol.plans[0]
        waiting = sorted((bound[g], g) for g in failed if plan[g] == SKIP and bound[g] <= p)
        if not waiting:
            continue
        if not lambda_free(p, [t for t in plan.values() if t != SKIP], lam, n):
            continue
        for _, g in waiting:
            new_plan = dict(plan)
            new_plan[g] = p
            trial = ev.trial(sol, Move(None, {0: new_plan}))
            delta = trial.wo_sum - sol.wo_sum
            if delta <= limit:
                ev.commit(sol, trial)
                log.append(Insertion(instance.vehicle_id(g), p, delta / 10))
                break
    return SimRun(sol.wo_sum / 10, float(sol.re_sum), log)


def run_simulation_suite(solutions: Sequence[Tuple[str, Sequence[int]]], instance: Instance,
                         sim: SimConfig, sample: Optional[ScenarioSample] = None,
                         keep_records: bool = False, mapper=map) -> SimResult:
    """Simulate every ``(variant, first_stage)`` on a fresh test sample.

    Means are taken per (variant, threshold) over all of the variant's
    solutions and all test scenarios. ``mapper`` may be a process pool's
    ``map`` to simulate solutions in parallel; results do not depend on it.
    """
    if sample is None:
        sample = sample_scenarios(instance, sim.n_test_scenarios, sim.seed)
    # sums kept in tenths and squared days so any summation order is exact
    sums: Dict[Tuple[str, float], List[int]] = {}
    order: List[str] = []
    records: List[SimRecord] = []
    job = partial(simulate_solution, instance=instance, sample=sample, thresholds=sim.thresholds)
    all_runs = mapper(job, [list(fs) for _, fs in solutions])
    for idx, ((variant, _), runs) in enumerate(zip(solutions, all_runs)):
        if variant not in order:
            order.append(variant)
        for (w, thr), run in runs.items():
            acc = sums.setdefault((variant, thr), [0, 0, 0])
            acc[0] += tenths(run.wo)
            acc[1] += round(run.re)
            acc[2] += 1
            if keep_records:
                records.append(SimRecord(variant, idx, w, thr, run))
    rows = [SimRow(v, thr, sums[v, thr][0] / (10 * sums[v, thr][2]), sums[v, thr][1] / sums[v, thr][2])
            for v in order for thr in sim.thresholds]
    return SimResult(rows, records)


def simulate_solution(first_stage: Sequence[int], instance: Instance, sample: ScenarioSample,
                      thresholds: Sequence[float]) -> Dict[Tuple[int, float], SimRun]:
    """One run per (test scenario, threshold), keyed in that order."""
    return {(w, thr): simulate_dynamic(first_stage, sc, instance, thr)
            for w, sc in enumerate(sample.scenarios) for thr in thresholds}


def average_rows(tables: Sequence[Sequence[SimRow]]) -> List[SimRow]:
    """Average several per-instance tables row by row (equal instance weights)."""
    acc: Dict[Tuple[str, float], List[float]] = {}
    order: List[Tuple[str, float]] = []
    for table in tables:
        for r in table:
            key = (r.variant, r.threshold)
            if key not in acc:
                acc[key] = [0.0, 0.0, 0]
                order.append(key)
            acc[key][0] += r.mean_obj_wo
            acc[key][1] += r.mean_obj_re
            acc[key][2] += 1
    return [SimRow(v, t, acc[v, t][0] / acc[v, t][2], acc[v, t][1] / acc[v, t][2])
            for v, t in order]


def write_sim_csv(rows: Sequence[SimRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["variant", "threshold", "mean_obj_wo", "mean_obj_re"])
        for r in rows:
            wr.writerow([r.variant, fmt_tu(tenths(r.threshold)) if math.isfinite(r.threshold) else 'inf', f"{r.mean_obj_wo:.6g}",
                         f"{r.mean_obj_re:.6g}"])
