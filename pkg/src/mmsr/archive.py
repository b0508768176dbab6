"""Archive CSV: one row per non-dominated solution of one run.

Vehicles are written by their instance ids. ``plans`` holds one block per
scenario separated by ``|``; a block lists ``id:t`` pairs separated by
``;`` with ``t = 0`` meaning not reinserted.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Dict, List, Sequence

from .instances import ParseError
from .model import Instance, Solution, fmt_tu

COLUMNS = ["instance", "algo", "run", "wo", "re", "first_stage", "plans"]


@dataclass(frozen=True)
class ArchiveRow:
    instance: str
    algo: str
    run: int
    wo: float
    re: float
    first_stage: List[int]  # vehicle ids
    plans: List[Dict[int, int]]  # vehicle id -> target

    @property
    def point(self):
        return (self.wo, self.re)


def _gid_by_id(instance: Instance) -> Dict[int, int]:
    total = instance.n + len(instance.old_pool)
    return {instance.vehicle_id(g): g for g in range(total)}


def to_row(name: str, algo: str, run: int, sol: Solution, instance: Instance) -> ArchiveRow:
    vid = instance.vehicle_id
    return ArchiveRow(name, algo, run, sol.obj_wo, sol.obj_re,
                      [vid(v) for v in sol.first_stage],
                      [{vid(g): t for g, t in sorted(p.items())} for p in sol.plans])


def to_solution(row: ArchiveRow, instance: Instance) -> Solution:
    gid = _gid_by_id(instance)
    return Solution([gid[v] for v in row.first_stage],
                    [{gid[v]: t for v, t in p.items()} for p in row.plans], len(row.plans))


def _fmt_re(x: float) -> str:
    return f"{x:.6g}"


def write_archive(rows: Sequence[ArchiveRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(COLUMNS)
        for r in rows:
            plans = "|".join(";".join(f"{v}:{t}" for v, t in p.items()) for p in r.plans)
            wr.writerow([r.instance, r.algo, r.run, fmt_tu(round(r.wo * 10)), _fmt_re(r.re),
                         " ".join(map(str, r.first_stage)), plans])


def _parse_plans(text: str) -> List[Dict[int, int]]:
    if text == "":
        return []
    out = []
    for block in text.split("|"):
        plan = {}
        if block:
            for pair in block.split(";"):
                v, t = pair.split(":")
                plan[int(v)] = int(t)
        out.append(plan)
    return out


def read_archive(path) -> List[ArchiveRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.DictReader(fh)
        if rd.fieldnames != COLUMNS:
            raise ParseError(f"{path}: expected columns {COLUMNS}, got {rd.fieldnames}")
        rows = []
        for rec in rd:
            try:
                rows.append(ArchiveRow(rec["instance"], rec["algo"], int(rec["run"]),
                                       float(rec["wo"]), float(rec["re"]),
                                       [int(v) for v in rec["first_stage"].split()],
                                       _parse_plans(rec["plans"])))
            except (TypeError, ValueError) as exc:
                raise ParseError(f"{path}:{rd.line_num}: {exc}") from None
    return rows
