"""Command-line driver: generate, solve, metrics, simulate.

Every command is a pure function of its input files, flags and seeds.
Exit codes: 0 success, 1 input/output problem, 2 bad usage.
"""

from __future__ import annotations

import argparse
import glob
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

from .archive import ArchiveRow, read_archive, to_row, write_archive
from .evolutionary import EaConfig, ls_nsga2, nsga2
from .instances import GeneratorConfig, ParseError, generate_instance, load_instance, sample_scenarios, write_instance
from .metrics import (NormalizationBounds, css, eaf_surface, heuristic_ideal, mid, nns, normalize, sns,
                      write_css_matrix, write_eaf, write_metric_rows)
from .pareto import nondominated_points
from .search import Budget, StmlsConfig, solve_one_scenario, stmls
from .simulator import DEFAULT_THRESHOLDS, SimConfig, run_simulation_suite, write_sim_csv

ALGOS = ("stmls", "nsga2", "lsnsga2", "onescenario", "ff")
VARIANT = {"onescenario": "one-scenario", "ff": "FF"}  # everything else is FFR


class UsageError(Exception):
    pass


def _ints(text: str) -> List[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _floats(text: str) -> List[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _pair(text: str) -> Tuple[float, float]:
    vals = _floats(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"expected 'lo,hi', got {text!r}")
    return vals[0], vals[1]


def _budget(text: str) -> Budget:
    try:
        return Budget.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("MMSR_JOBS", "1")))
    except ValueError:
        return 1


@contextmanager
def _mapper(jobs: int):
    if jobs <= 1:
        yield map
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        yield pool.map


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------

def _generate_one(job):
    config, out = job
    write_instance(generate_instance(config), out)
    return out


def cmd_generate(args) -> int:
    seeds = args.seed
    if len(seeds) > 1 and "{seed}" not in args.out:
        raise UsageError("several seeds need an --out pattern containing {seed}")
    jobs = []
    for s in seeds:
        cfg = GeneratorConfig(n_vehicles=args.vehicles, n_stations=args.stations, cycle=args.cycle,
                              station_length=args.length, battery_length=args.battery_length,
                              lam=args.lam, f_max=args.fmax, seed=s)
        if args.highrisk_ratio is not None:
            cfg.highrisk_ratio_range = args.highrisk_ratio
        problems = cfg.problems()
        if problems:
            raise UsageError("; ".join(problems))
        jobs.append((cfg, args.out.replace("{seed}", str(s))))
    with _mapper(args.jobs) as m:
        for out in m(_generate_one, jobs):
            print(out)
    return 0


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

def run_algorithm(instance, sample, algo: str, budget: Budget, seed: int, population=None):
    if algo == "stmls":
        return stmls(instance, sample, StmlsConfig(budget=budget, seed=seed))
    if algo == "ff":
        return stmls(instance, sample, StmlsConfig(budget=budget, seed=seed, reinsertion=False))
    if algo == "onescenario":
        return [solve_one_scenario(instance, budget, seed)]
    if algo == "nsga2":
        return nsga2(instance, sample, EaConfig(population=population or 40, budget=budget, seed=seed))
    if algo == "lsnsga2":
        return ls_nsga2(instance, sample, EaConfig(population=population or 16, budget=budget, seed=seed))
    raise UsageError(f"unknown algorithm {algo!r}")


def _solve_one(job) -> List[ArchiveRow]:
    path, name, algo, sample_n, sample_seed, budget, seed, population = job
    instance = load_instance(path)
    sample = sample_scenarios(instance, sample_n, sample_seed)
    sols = run_algorithm(instance, sample, algo, budget, seed, population)
    return [to_row(name, algo, seed, s, instance) for s in sols]


def cmd_solve(args) -> int:
    load_instance(args.instance)  # fail fast on unreadable input
    name = Path(args.instance).stem
    jobs = [(args.instance, name, args.algo, args.sample_n, args.sample_seed, args.budget, s,
             args.population) for s in args.seed]
    rows: List[ArchiveRow] = []
    with _mapper(args.jobs) as m:
        for part in m(_solve_one, jobs):
            rows.extend(part)
    write_archive(rows, args.out)
    return 0


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def _archive_paths(pattern: str) -> List[str]:
    return sorted(glob.glob(pattern))


def compute_metrics(rows: Sequence[ArchiveRow], levels: Sequence[float]):
    """Per-run quality rows, per-instance CSS matrices and EAF surfaces."""
    by_inst: Dict[str, Dict[str, Dict[int, List[Tuple[float, float]]]]] = {}
    for r in rows:
        by_inst.setdefault(r.instance, {}).setdefault(r.algo, {}).setdefault(r.run, []).append(r.point)
    metric_rows, css_tables, surfaces = [], [], []
    for inst in sorted(by_inst):
        algos = by_inst[inst]
        fronts = [f for runs in algos.values() for f in runs.values()]
        bounds = NormalizationBounds.of(fronts)
        ideal = heuristic_ideal([normalize(f, bounds) for f in fronts])
        labels = sorted(algos)
        for a in labels:
            for run in sorted(algos[a]):
                f = normalize(nondominated_points(algos[a][run]), bounds)
                metric_rows.append({"instance": inst, "algorithm": a, "run": run, "nns": nns(f),
                                    "mid": mid(f, ideal), "sns": sns(f, ideal)})
        unions = {a: nondominated_points(p for f in algos[a].values() for p in f) for a in labels}
        matrix = [[css(unions[x], unions[y]) for y in labels] for x in labels]
        css_tables.append((inst, labels, matrix))
        for a in labels:
            runs = [algos[a][k] for k in sorted(algos[a])]
            for lev in levels:
                surfaces.append((inst, a, lev, eaf_surface(runs, lev)))
    return metric_rows, css_tables, surfaces


def cmd_metrics(args) -> int:
    paths = _archive_paths(args.archives)
    if not paths:
        raise UsageError(f"no archive matches {args.archives!r}")
    rows = [r for p in paths for r in read_archive(p)]
    if not rows:
        raise UsageError("archives hold no solutions")
    metric_rows, css_tables, surfaces = compute_metrics(rows, args.eaf_levels)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_metric_rows(metric_rows, out / "metrics.csv")
    for inst, labels, matrix in css_tables:
        write_css_matrix(labels, matrix, out / f"css_{inst}.csv", inst)
    write_eaf(surfaces, out / "eaf.csv")
    return 0


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    paths = _archive_paths(args.archives)
    if not paths:
        raise UsageError(f"no archive matches {args.archives!r}")
    instance = load_instance(args.instance)
    name = Path(args.instance).stem
    rows = [r for p in paths for r in read_archive(p) if r.instance == name]
    if not rows:
        raise UsageError(f"no archived solution belongs to instance {name!r}")
    gid = {instance.vehicle_id(v): v for v in range(instance.n)}
    solutions = [(VARIANT.get(r.algo, "FFR"), [gid[v] for v in r.first_stage]) for r in rows]
    order = {"one-scenario": 0, "FF": 1, "FFR": 2}
    solutions.sort(key=lambda s: order[s[0]])  # stable: file order kept within a variant
    sim = SimConfig(tuple(args.thresholds), args.test_n, args.seed)
    with _mapper(args.jobs) as m:
        result = run_simulation_suite(solutions, instance, sim, mapper=m)
    write_sim_csv(result.rows, args.out)
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mmsr", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def jobs_flag(sp):
        sp.add_argument("--jobs", type=int, default=_default_jobs(),
                        help="worker processes (default: $MMSR_JOBS or 1)")

    g = sub.add_parser("generate", help="write random instance files")
    g.add_argument("--vehicles", type=int, required=True)
    g.add_argument("--seed", type=_ints, required=True, help="seed or comma-separated seeds")
    g.add_argument("--out", required=True, help="output path; use {seed} with several seeds")
    g.add_argument("--stations", type=int, default=5)
    g.add_argument("--cycle", type=float, default=97.0)
    g.add_argument("--length", type=float, default=120.0)
    g.add_argument("--battery-length", type=float, default=240.0)
    g.add_argument("--lam", type=int, default=10)
    g.add_argument("--fmax", type=int, default=None)
    g.add_argument("--highrisk-ratio", type=_pair, default=None, metavar="LO,HI")
    jobs_flag(g)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="run one algorithm and write its archive")
    s.add_argument("--instance", required=True)
    s.add_argument("--algo", choices=ALGOS, required=True)
    s.add_argument("--sample-n", type=int, default=100)
    s.add_argument("--sample-seed", type=int, default=0)
    s.add_argument("--budget", type=_budget, default=Budget(10_000, "it"))
    s.add_argument("--seed", type=_ints, default=[0], help="run seed or comma-separated seeds")
    s.add_argument("--population", type=int, default=None)
    s.add_argument("--out", required=True)
    jobs_flag(s)
    s.set_defaults(func=cmd_solve)

    m = sub.add_parser("metrics", help="quality measures over archives")
    m.add_argument("--archives", required=True, help="glob of archive CSV files")
    m.add_argument("--out", required=True, help="output directory")
    m.add_argument("--eaf-levels", type=_floats, default=[0.5])
    m.set_defaults(func=cmd_metrics)

    r = sub.add_parser("simulate", help="dynamic reinsertion on fresh test scenarios")
    r.add_argument("--instance", required=True)
    r.add_argument("--archives", required=True)
    r.add_argument("--test-n", type=int, default=50)
    r.add_argument("--thresholds", type=_floats, default=list(DEFAULT_THRESHOLDS))
    r.add_argument("--seed", type=int, default=1_000_003)
    r.add_argument("--out", required=True)
    jobs_flag(r)
    r.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"mmsr: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ParseError) as exc:
        print(f"mmsr: error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        # bad flag values caught by the library (sample sizes, thresholds, ...)
        parser.print_usage(sys.stderr)
        print(f"mmsr: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
