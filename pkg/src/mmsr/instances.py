"""Instance generation, scenario sampling and the text file formats."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

from .model import Instance, OldFailedVehicle, Scenario, Station, Vehicle, fmt_tu, tenths

# (min, mean, max) processing time per station, TU
PROCESSING_TIMES = (
    (42.6, 94.1, 117.2),
    (7.9, 84.3, 197.9),
    (57.8, 96.2, 113.3),
    (26.9, 96.9, 109.7),
    (57.8, 96.2, 114.3),
)

# shape concentration (alpha + beta) of the scaled beta draws
BETA_CONCENTRATION = 4.0


class ParseError(ValueError):
    pass


@dataclass
class GeneratorConfig:
    n_vehicles: int = 200
    n_stations: int = 5
    cycle: float = 97.0
    station_length: float = 120.0
    battery_length: float = 240.0
    ev_ratio_range: Tuple[float, float] = (0.25, 0.33)
    highrisk_ratio_range: Tuple[float, float] = (0.03, 0.05)
    highrisk_prob_range: Tuple[float, float] = (0.2, 0.35)
    lowrisk_prob_range: Tuple[float, float] = (0.0, 0.01)
    fmax_fraction: float = 0.05
    f_max: Optional[int] = None
    lam: int = 10
    lead_time: int = 9
    ready_new_range: Optional[Tuple[int, int]] = None
    ready_old_range: Optional[Tuple[int, int]] = None
    seed: int = 0

    def problems(self) -> List[str]:
        out = []
        for name in ("ev_ratio_range", "highrisk_ratio_range", "highrisk_prob_range",
                     "lowrisk_prob_range"):
            lo, hi = getattr(self, name)
            if not 0.0 <= lo <= hi <= 1.0:
                out.append(f"{name} {lo, hi} is not an ordered sub-range of [0, 1]")
        if self.n_vehicles < 1:
            out.append("n_vehicles must be positive")
        if not 1 <= self.n_stations <= len(PROCESSING_TIMES):
            out.append(f"n_stations must be in 1..{len(PROCESSING_TIMES)}")
        if self.fmax_fraction < 0 or (self.f_max is not None and self.f_max < 0):
            out.append("f_max must be non-negative")
        if self.lam < 1:
            out.append("lambda must be >= 1")
        if self.lead_time < 1:
            out.append("lead time must be >= 1")
        if min(self.station_length, self.battery_length) < self.cycle:
            out.append("station lengths must be >= cycle")
        for name in ("ready_new_range", "ready_old_range"):
            rng = getattr(self, name)
            if rng is not None and not 0 <= rng[0] <= rng[1]:
                out.append(f"{name} {rng} is not an ordered non-negative range")
        return out

    def resolved_fmax(self) -> int:
        if self.f_max is not None:
            return self.f_max
        return math.floor(self.n_vehicles * self.fmax_fraction + 1e-9)

    def resolved_ready_ranges(self) -> Tuple[Tuple[int, int], Tuple[int, int]]:
        n = self.n_vehicles
        new = self.ready_new_range
        if new is None:
            lo = min(10, n // 2)
            new = (lo, max(lo, n - 10))
        old = self.ready_old_range
        if old is None:
            old = (0, max(0, n - 10))
        return new, old


@dataclass(frozen=True)
class ScenarioSample:
    scenarios: Tuple[Scenario, ...]
    seed: int = 0

    def __len__(self) -> int:
        return len(self.scenarios)


def _scaled_beta(rng: random.Random, lo: float, hi: float, mean: float) -> float:
    if hi <= lo:
        return lo
    m = min(max((mean - lo) / (hi - lo), 0.01), 0.99)
    return lo + (hi - lo) * rng.betavariate(m * BETA_CONCENTRATION, (1 - m) * BETA_CONCENTRATION)


def _draw_times(rng: random.Random, k: int, ev: bool, ev_ratio: float) -> Tuple[int, ...]:
    times = []
    for s in range(k):
        lo, mean, hi = PROCESSING_TIMES[s]
        if s == 0:
            # battery station: EVs in the upper third, the rest below it,
            # with the non-EV mean chosen so the overall mean stays on target
            cut = lo + 2 * (hi - lo) / 3
            ev_mean = (cut + hi) / 2
            if ev:
                x = _scaled_beta(rng, cut, hi, ev_mean)
            else:
                rest_mean = (mean - ev_ratio * ev_mean) / (1 - ev_ratio)
                x = _scaled_beta(rng, lo, cut, rest_mean)
        else:
            x = _scaled_beta(rng, lo, hi, mean)
        t = int(round(x * 10))
        times.append(min(max(t, tenths(lo)), tenths(hi)))
    return tuple(times)


def generate_instance(config: GeneratorConfig) -> Instance:
    """Industry-style random instance, a pure function of ``config``."""
    problems = config.problems()
    if problems:
        raise ValueError("invalid generator config: " + "; ".join(problems))
    rng = random.Random(config.seed)
    n = config.n_vehicles
    k = config.n_stations
    f_max = config.resolved_fmax()
    (new_lo, new_hi), (old_lo, old_hi) = config.resolved_ready_ranges()

    ev_ratio = rng.uniform(*config.ev_ratio_range)
    n_ev = int(round(ev_ratio * n))
    evs = set(rng.sample(range(n), n_ev))
    hr_ratio = rng.uniform(*config.highrisk_ratio_range)
    n_hr = int(round(hr_ratio * n))
    highs = set(rng.sample(range(n), n_hr))

    vehicles = []
    for v in range(n):
        ev = v in evs
        times = _draw_times(rng, k, ev, ev_ratio)
        if v in highs:
            risk, prob = "high", round(rng.uniform(*config.highrisk_prob_range), 3)
        else:
            risk, prob = "low", round(rng.uniform(*config.lowrisk_prob_range), 4)
        vehicles.append(Vehicle(v + 1, times, prob, risk, rng.randint(new_lo, new_hi), ev))

    pool = []
    for j in range(f_max):
        times = _draw_times(rng, k, False, ev_ratio)
        g = rng.randint(1, config.lead_time)
        d = rng.randint(g, config.lead_time)
        r = rng.randint(old_lo, old_hi)
        pool.append(OldFailedVehicle(Vehicle(n + j + 1, times, 0.0, "low", r, False), g, d))

    stations = [Station(1, tenths(config.battery_length))]
    stations += [Station(s + 1, tenths(config.station_length)) for s in range(1, k)]
    return Instance(tuple(stations), tuple(vehicles), tenths(config.cycle), f_max, config.lam,
                    config.lead_time, tuple(pool))


def sample_scenarios(instance: Instance, n_scenarios: int = 100, seed: int = 0) -> ScenarioSample:
    """I.i.d. failure realizations; only high-risk vehicles may fail."""
    if n_scenarios < 1:
        raise ValueError("sample size must be at least 1")
    rng = random.Random(seed)
    highs = [v for v, veh in enumerate(instance.vehicles) if veh.risk_class == "high"]
    scenarios = []
    for _ in range(n_scenarios):
        exist = [True] * instance.n
        for v in highs:
            if rng.random() < instance.vehicles[v].failure_prob:
                exist[v] = False
        count = rng.randint(0, instance.f_max)
        old = tuple(sorted(rng.sample(range(len(instance.old_pool)), count)))
        scenarios.append(Scenario(tuple(exist), old))
    return ScenarioSample(tuple(scenarios), seed)


def one_scenario_sample(instance: Instance) -> ScenarioSample:
    """The deterministic problem: nothing fails and no old vehicles wait."""
    return ScenarioSample((Scenario((True,) * instance.n, ()),), 0)


def scenario_probability(instance: Instance, scenario: Scenario) -> float:
    p = 1.0 / (instance.f_max + 1)
    for veh, e in zip(instance.vehicles, scenario.exist_mask):
        p *= (1.0 - veh.failure_prob) if e else veh.failure_prob
    return p


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

def write_instance(instance: Instance, path) -> None:
    lines = ["MMSR v1",
             f"cycle {fmt_tu(instance.cycle)}",
             f"lambda {instance.lam}",
             f"fmax {instance.f_max}",
             f"leadtime {instance.lead_time}",
             f"stations {instance.n_stations}"]
    lines += [f"station {s.id} {fmt_tu(s.length)}" for s in instance.stations]
    lines.append(f"vehicles {instance.n}")
    for v in instance.vehicles:
        times = " ".join(fmt_tu(p) for p in v.processing_times)
        lines.append(f"vehicle {v.id} {int(v.is_ev)} {v.risk_class} {v.failure_prob!r} "
                     f"{v.ready_offset} {times}")
    lines.append(f"oldpool {len(instance.old_pool)}")
    for o in instance.old_pool:
        times = " ".join(fmt_tu(p) for p in o.vehicle.processing_times)
        lines.append(f"old {o.vehicle.id} {o.wait_days} {o.slack_days} "
                     f"{o.vehicle.ready_offset} {times}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


class _Lines:
    def __init__(self, text: str, source: str):
        self.items = [(i + 1, ln.split()) for i, ln in enumerate(text.splitlines())
                      if ln.strip() and not ln.lstrip().startswith("#")]
        self.pos = 0
        self.source = source

    def error(self, lineno, msg):
        return ParseError(f"{self.source}:{lineno}: {msg}")

    def next(self, keyword: str, nfields: Optional[int] = None):
        if self.pos >= len(self.items):
            raise ParseError(f"{self.source}: missing field {keyword!r} (unexpected end of file)")
        lineno, toks = self.items[self.pos]
        if toks[0] != keyword:
            raise self.error(lineno, f"missing field {keyword!r} (found {toks[0]!r})")
        if nfields is not None and len(toks) - 1 != nfields:
            raise self.error(lineno, f"{keyword!r} expects {nfields} values, got {len(toks) - 1}")
        self.pos += 1
        return lineno, toks[1:]

    def scalar(self, keyword: str, conv):
        lineno, vals = self.next(keyword, 1)
        return self.convert(lineno, keyword, vals[0], conv)

    def convert(self, lineno, name, value, conv):
        try:
            return conv(value)
        except ValueError as exc:
            raise self.error(lineno, f"bad value for {name!r}: {value!r} ({exc})") from None


def load_instance(path) -> Instance:
    text = Path(path).read_text(encoding="utf-8")
    return parse_instance(text, str(path))


def parse_instance(text: str, source: str = "<instance>") -> Instance:
    lines = _Lines(text, source)
    lineno, header = lines.next("MMSR", 1)
    if header[0] != "v1":
        raise lines.error(lineno, f"unsupported version {header[0]!r}")
    cycle = lines.scalar("cycle", tenths)
    lam = lines.scalar("lambda", int)
    f_max = lines.scalar("fmax", int)
    lead = lines.scalar("leadtime", int)
    k = lines.scalar("stations", int)
    stations = []
    for _ in range(k):
        ln, vals = lines.next("station", 2)
        stations.append(Station(lines.convert(ln, "station id", vals[0], int),
                                lines.convert(ln, "station length", vals[1], tenths)))
    n = lines.scalar("vehicles", int)
    vehicles = []
    for _ in range(n):
        ln, vals = lines.next("vehicle", 5 + k)
        ev = lines.convert(ln, "ev", vals[1], int)
        if ev not in (0, 1):
            raise lines.error(ln, f"bad value for 'ev': {vals[1]!r}")
        if vals[2] not in ("low", "high"):
            raise lines.error(ln, f"bad value for 'risk': {vals[2]!r}")
        vehicles.append(Vehicle(
            lines.convert(ln, "vehicle id", vals[0], int),
            tuple(lines.convert(ln, "processing time", p, tenths) for p in vals[5:]),
            lines.convert(ln, "fprob", vals[3], float),
            vals[2],
            lines.convert(ln, "r", vals[4], int),
            bool(ev)))
    m = lines.scalar("oldpool", int)
    pool = []
    for _ in range(m):
        ln, vals = lines.next("old", 4 + k)
        veh = Vehicle(lines.convert(ln, "old id", vals[0], int),
                      tuple(lines.convert(ln, "processing time", p, tenths) for p in vals[4:]),
                      0.0, "low", lines.convert(ln, "r", vals[3], int), False)
        pool.append(OldFailedVehicle(veh, lines.convert(ln, "g", vals[1], int),
                                     lines.convert(ln, "d", vals[2], int)))
    if lines.pos != len(lines.items):
        ln, toks = lines.items[lines.pos]
        raise lines.error(ln, f"unexpected trailing field {toks[0]!r}")
    return Instance(tuple(stations), tuple(vehicles), cycle, f_max, lam, lead, tuple(pool))


def write_sample(sample: ScenarioSample, instance: Instance, path) -> None:
    lines = ["SAMPLE v1", f"n {len(sample.scenarios)}", f"seed {sample.seed}"]
    for i, sc in enumerate(sample.scenarios):
        fails = ",".join(str(instance.vehicles[v].id) for v in sc.failed_new)
        old = ",".join(str(j) for j in sc.old_present)
        lines.append(f"scenario {i} fails:{fails} old:{old}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_sample(path, instance: Instance) -> ScenarioSample:
    lines = _Lines(Path(path).read_text(encoding="utf-8"), str(path))
    lineno, header = lines.next("SAMPLE", 1)
    if header[0] != "v1":
        raise lines.error(lineno, f"unsupported version {header[0]!r}")
    count = lines.scalar("n", int)
    seed = lines.scalar("seed", int)
    index = {v.id: i for i, v in enumerate(instance.vehicles)}
    scenarios = []
    for _ in range(count):
        ln, vals = lines.next("scenario", 3)
        if not (vals[1].startswith("fails:") and vals[2].startswith("old:")):
            raise lines.error(ln, "expected 'fails:' and 'old:' fields")
        exist = [True] * instance.n
        for tok in filter(None, vals[1][6:].split(",")):
            vid = lines.convert(ln, "fails", tok, int)
            if vid not in index:
                raise lines.error(ln, f"unknown vehicle id {vid}")
            exist[index[vid]] = False
        old = tuple(lines.convert(ln, "old", tok, int)
                    for tok in filter(None, vals[2][4:].split(",")))
        scenarios.append(Scenario(tuple(exist), old))
    return ScenarioSample(tuple(scenarios), seed)
