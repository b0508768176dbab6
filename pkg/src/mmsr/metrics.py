"""Front quality measures: NNS, CSS (C-metric), MID, SNS, attainment surfaces.

Fronts are sequences of ``(wo, re)`` pairs. Distances are taken in the
normalized space of one instance; the heuristic ideal point is the
per-objective best value over every run of every algorithm.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

from .pareto import nondominated_points, weakly_dominates

Point = Tuple[float, float]


@dataclass(frozen=True)
class NormalizationBounds:
    mins: Tuple[float, ...]
    maxs: Tuple[float, ...]

    def __post_init__(self):
        if any(lo > hi for lo, hi in zip(self.mins, self.maxs)):
            raise ValueError("normalization bounds need min <= max")

    @classmethod
    def of(cls, fronts: Iterable[Sequence[Point]]) -> "NormalizationBounds":
        pts = [p for f in fronts for p in f]
        if not pts:
            raise ValueError("no points to bound")
        dims = range(len(pts[0]))
        return cls(tuple(min(p[d] for p in pts) for d in dims),
                   tuple(max(p[d] for p in pts) for d in dims))


def normalize(points: Sequence[Point], bounds: NormalizationBounds) -> List[Point]:
    out = []
    for p in points:
        q = []
        for v, lo, hi in zip(p, bounds.mins, bounds.maxs):
            q.append(0.0 if hi == lo else (v - lo) / (hi - lo))
        out.append(tuple(q))
    return out


def css(X: Sequence[Point], Y: Sequence[Point]) -> float:
    """Share of ``Y`` weakly dominated by some point of ``X``."""
    if not Y:
        raise ValueError("css is undefined for an empty second front")
    covered = sum(1 for y in Y if any(weakly_dominates(x, y) for x in X))
    return covered / len(Y)


def _distances(front: Sequence[Point], ideal: Sequence[float]) -> List[float]:
    return [math.dist(p, ideal) for p in front]


def mid(front: Sequence[Point], ideal: Sequence[float]) -> float:
    """Mean Euclidean distance to the ideal point."""
    if not front:
        raise ValueError("mid of an empty front")
    d = _distances(front, ideal)
    return sum(d) / len(d)


def sns(front: Sequence[Point], ideal: Sequence[float]) -> float:
    """Sample standard deviation of the distances to the ideal; 0 for one point."""
    if not front:
        raise ValueError("sns of an empty front")
    d = _distances(front, ideal)
    if len(d) == 1:
        return 0.0
    m = sum(d) / len(d)
    return math.sqrt(sum((x - m) ** 2 for x in d) / (len(d) - 1))


def nns(front: Sequence[Point]) -> int:
    return len(set(map(tuple, front)))


def heuristic_ideal(fronts: Iterable[Sequence[Point]]) -> Point:
    """Best value of each objective over all given fronts."""
    pts = [p for f in fronts for p in f]
    if not pts:
        raise ValueError("no points")
    return tuple(min(p[d] for p in pts) for d in range(len(pts[0])))


def eaf_surface(runs: Sequence[Sequence[Point]], level: float) -> List[Point]:
    """Minimal corner points of the region attained by ``ceil(level * R)`` runs.

    The region is evaluated on the grid of observed coordinates; the
    result is a staircase ordered by increasing first objective.
    """
    if not runs:
        raise ValueError("need at least one run")
    if not 0 < level <= 1:
        raise ValueError("level must lie in (0, 1]")
    R = len(runs)
    k = max(1, math.ceil(level * R - 1e-9))
    fronts = [nondominated_points(map(tuple, r)) for r in runs]
    xs = sorted({p[0] for f in fronts for p in f})
    out: List[Point] = []
    best = math.inf
    for x in xs:
        attain = []
        for f in fronts:
            ys = [p[1] for p in f if p[0] <= x]
            attain.append(min(ys) if ys else math.inf)
        attain.sort()
        y = attain[k - 1]
        if y < best:
            out.append((x, y))
            best = y
    return out


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

def fmt6(x: float) -> str:
    return f"{x:.6g}"


def write_metric_rows(rows: Sequence[Dict], path) -> None:
    cols = ["instance", "algorithm", "run", "nns", "mid", "sns"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(cols)
        for r in rows:
            wr.writerow([r["instance"], r["algorithm"], r["run"], r["nns"],
                         fmt6(r["mid"]), fmt6(r["sns"])])


def write_css_matrix(labels: Sequence[str], matrix: Sequence[Sequence[float]], path,
                     instance: str = "") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["instance", "X"] + list(labels))
        for lab, row in zip(labels, matrix):
            wr.writerow([instance, lab] + [fmt6(v) for v in row])


def write_eaf(surfaces: Sequence[Tuple[str, str, float, Sequence[Point]]], path) -> None:
    """Rows ``(instance, algorithm, level, x, y)``, one per staircase corner."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["instance", "algorithm", "level", "x", "y"])
        for inst, algo, level, pts in surfaces:
            for x, y in pts:
                wr.writerow([inst, algo, fmt6(level), fmt6(x), fmt6(y)])
