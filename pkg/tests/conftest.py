import random

import pytest
from hypothesis import settings

from mmsr.model import Instance, OldFailedVehicle, Scenario, Station, Vehicle

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def make_instance(times, lengths=(1200,), cycle=970, f_max=0, lam=1, ready=None, old=(),
                  risk=None, probs=None, lead_time=9):
    """Hand-built instance; ``times`` holds per-vehicle tuples in tenths.

    ``old`` entries are ``(times, g, d, r)``.
    """
    vehicles = []
    for i, t in enumerate(times):
        vehicles.append(Vehicle(i + 1, tuple(t),
                                probs[i] if probs else 0.0,
                                risk[i] if risk else "low",
                                ready[i] if ready else 0))
    pool = [OldFailedVehicle(Vehicle(len(times) + j + 1, tuple(t), 0.0, "low", r), g, d)
            for j, (t, g, d, r) in enumerate(old)]
    stations = tuple(Station(k + 1, lk) for k, lk in enumerate(lengths))
    return Instance(stations, tuple(vehicles), cycle, f_max, lam, lead_time, tuple(pool))


def scenario(n, failed=(), old=()):
    return Scenario(tuple(v not in failed for v in range(n)), tuple(old))


@pytest.fixture
def rng():
    return random.Random(12345)


# acceptance verdicts, echoed in the terminal summary
VERDICTS = {}


def record_verdict(number, passed, detail):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
    VERDICTS[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(VERDICTS):
            terminalreporter.write_line(VERDICTS[k])
