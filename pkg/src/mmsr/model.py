"""Domain types for mixed-model sequencing with failures and reinsertion.

Time quantities (processing times, station lengths, cycle time, overloads)
are stored as integers counting tenths of a time unit, so every sum and
comparison is exact. ``tenths`` and ``fmt_tu`` convert at the boundaries.

Vehicles are addressed internally by a *global index* (gid): the regular
vehicles of the horizon take ``0..n-1`` in instance order, old failed
vehicles take ``n..n+m-1`` in old-pool order. Reinsertion plans are keyed
by gid and map to ``SKIP`` (0) or a first-stage position ``t`` in ``1..n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

SKIP = 0

ReinsertionPlan = Dict[int, int]


class ContractViolation(ValueError):
    """Raised when an operation is called outside its precondition."""


def tenths(value) -> int:
    """Convert a TU value (str, int, float or Decimal) to integer tenths."""
    try:
        d = Decimal(str(value)) * 10
    except InvalidOperation as exc:
        raise ValueError(f"not a number: {value!r}") from exc
    q = d.to_integral_value()
    if q != d:
        raise ValueError(f"{value!r} has more than one decimal digit")
    return int(q)


def fmt_tu(x: int) -> str:
    sign = "-" if x < 0 else ""
    x = abs(x)
    return f"{sign}{x // 10}.{x % 10}"


@dataclass(frozen=True)
class Station:
    id: int
    length: int  # tenths of TU


@dataclass(frozen=True)
class Vehicle:
    id: int
    processing_times: Tuple[int, ...]  # tenths of TU, one per station
    failure_prob: float = 0.0
    risk_class: str = "low"
    ready_offset: int = 0
    is_ev: bool = False


@dataclass(frozen=True)
class OldFailedVehicle:
    vehicle: Vehicle
    wait_days: int  # g_i
    slack_days: int  # d_i

    @property
    def is_due(self) -> bool:
        return self.wait_days == self.slack_days


@dataclass(frozen=True)
class Instance:
    stations: Tuple[Station, ...]
    vehicles: Tuple[Vehicle, ...]
    cycle: int  # tenths of TU
    f_max: int
    lam: int
    lead_time: int = 9
    old_pool: Tuple[OldFailedVehicle, ...] = ()

    @cached_property
    def n(self) -> int:
        return len(self.vehicles)

    @property
    def n_stations(self) -> int:
        return len(self.stations)

    @cached_property
    def lengths(self) -> Tuple[int, ...]:
        return tuple(s.length for s in self.stations)

    @cached_property
    def loads(self) -> Tuple[Tuple[int, ...], ...]:
        """Processing-time tuple per gid (regular vehicles, then old pool)."""
        regular = [v.processing_times for v in self.vehicles]
        old = [o.vehicle.processing_times for o in self.old_pool]
        return tuple(regular + old)

    @cached_property
    def neutral_load(self) -> Tuple[int, ...]:
        return (self.cycle,) * self.n_stations

    @cached_property
    def ready_offsets(self) -> Tuple[int, ...]:
        return tuple(self.ready_offset(g) for g in range(len(self.loads)))

    @cached_property
    def due_flags(self) -> Tuple[bool, ...]:
        return tuple(self.is_due(g) for g in range(len(self.loads)))

    @cached_property
    def penalties(self) -> Tuple[int, ...]:
        return tuple(self.penalty(g) for g in range(len(self.loads)))

    def old_gid(self, pool_index: int) -> int:
        return self.n + pool_index

    def penalty(self, gid: int) -> int:
        """Squared waiting days charged when ``gid`` is left unreinserted."""
        if gid < self.n:
            return 1
        return (self.old_pool[gid - self.n].wait_days + 1) ** 2

    def ready_offset(self, gid: int) -> int:
        if gid < self.n:
            return self.vehicles[gid].ready_offset
        return self.old_pool[gid - self.n].vehicle.ready_offset

    def is_due(self, gid: int) -> bool:
        return gid >= self.n and self.old_pool[gid - self.n].is_due

    def vehicle_id(self, gid: int) -> int:
        if gid < self.n:
            return self.vehicles[gid].id
        return self.old_pool[gid - self.n].vehicle.id


@dataclass(frozen=True)
class Scenario:
    exist_mask: Tuple[bool, ...]
    old_present: Tuple[int, ...] = ()

    @cached_property
    def failed_new(self) -> Tuple[int, ...]:
        return tuple(v for v, e in enumerate(self.exist_mask) if not e)

    @cached_property
    def _failed_all(self) -> Tuple[int, ...]:
        n = len(self.exist_mask)
        return self.failed_new + tuple(n + j for j in sorted(self.old_present))

    def failed(self, n: int) -> Tuple[int, ...]:
        """All failed gids: new failures first, then present old vehicles."""
        if n == len(self.exist_mask):
            return self._failed_all
        return self.failed_new + tuple(n + j for j in sorted(self.old_present))


@dataclass(frozen=True)
class ObjectivePoint:
    wo: float
    re: float

    def dominates(self, other: "ObjectivePoint") -> bool:
        return (self.wo <= other.wo and self.re <= other.re
                and (self.wo < other.wo or self.re < other.re))


@dataclass(frozen=True)
class FinalSequence:
    """Post-reinsertion order as ``(gid, neutral)`` entries."""
    entries: Tuple[Tuple[int, bool], ...]

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def vehicles(self) -> List[int]:
        return [g for g, _ in self.entries]


@dataclass
class Solution:
    """First-stage permutation plus one reinsertion plan per scenario.

    Objective totals are cached as integer sums over the sample
    (``wo_sum`` in tenths of TU, ``re_sum`` in squared days); the public
    objective values are their sample means.
    """
    first_stage: List[int]
    plans: List[ReinsertionPlan]
    n_scenarios: int = 1
    wo_sum: int = 0
    re_sum: int = 0
    violation_degree: int = 0
    states: Optional[list] = field(default=None, repr=False, compare=False)
    evaluated: bool = False

    @property
    def obj_wo(self) -> float:
        return self.wo_sum / (10 * self.n_scenarios)

    @property
    def obj_re(self) -> float:
        return self.re_sum / self.n_scenarios

    @property
    def key(self) -> Tuple[int, int]:
        return (self.wo_sum, self.re_sum)

    @property
    def feasible(self) -> bool:
        return self.violation_degree == 0

    def point(self) -> ObjectivePoint:
        return ObjectivePoint(self.obj_wo, self.obj_re)

    def copy(self) -> "Solution":
        states = None if self.states is None else self.states.copy()
        return Solution(list(self.first_stage), [dict(p) for p in self.plans],
                        self.n_scenarios, self.wo_sum, self.re_sum,
                        self.violation_degree, states, self.evaluated)


def validate_instance(instance: Instance) -> List[str]:
    """Return one description per violated invariant (empty when valid)."""
    problems = []
    c = instance.cycle
    k = instance.n_stations
    for s in instance.stations:
        if s.length < c:
            problems.append(f"station {s.id}: length {fmt_tu(s.length)} < cycle {fmt_tu(c)}")
    if instance.lam < 1:
        problems.append(f"lambda {instance.lam} < 1")
    if instance.f_max < 0:
        problems.append(f"f_max {instance.f_max} < 0")
    if len(instance.old_pool) != instance.f_max:
        problems.append(f"old_pool size {len(instance.old_pool)} != f_max {instance.f_max}")

    def check_vehicle(v: Vehicle, label: str) -> None:
        if len(v.processing_times) != k:
            problems.append(f"{label} {v.id}: {len(v.processing_times)} processing times for {k} stations")
        if any(p < 0 for p in v.processing_times):
            problems.append(f"{label} {v.id}: negative processing time")
        if not 0.0 <= v.failure_prob <= 1.0:
            problems.append(f"{label} {v.id}: failure_prob {v.failure_prob} outside [0, 1]")
        if v.risk_class not in ("low", "high"):
            problems.append(f"{label} {v.id}: unknown risk class {v.risk_class!r}")
        if v.ready_offset < 0:
            problems.append(f"{label} {v.id}: negative ready_offset")

    for v in instance.vehicles:
        check_vehicle(v, "vehicle")
    for o in instance.old_pool:
        check_vehicle(o.vehicle, "old vehicle")
        if not 1 <= o.wait_days <= o.slack_days <= instance.lead_time:
            problems.append(f"old vehicle {o.vehicle.id}: need 1 <= g={o.wait_days} <= "
                            f"d={o.slack_days} <= G={instance.lead_time}")
    return problems


def check_permutation(seq: Sequence[int], n: int) -> None:
    if len(seq) != n or set(seq) != set(range(n)):
        raise ContractViolation(f"first stage is not a permutation of {n} vehicles")
