import pytest
from hypothesis import given, settings, strategies as st

from mmsr.evaluator import Evaluator, station_overload
from mmsr.instances import GeneratorConfig, ScenarioSample, generate_instance, sample_scenarios
from mmsr.oracle import OracleLimitError, enumerate_pareto, reference_overload, write_front
from mmsr.pareto import weakly_dominates
from mmsr.search import Budget, StmlsConfig, solve_one_scenario, stmls

from conftest import make_instance, scenario

L, C = 1200, 970


def test_cycle_loads_are_free():
    assert reference_overload([C, C], L, C) == 0


def test_agrees_on_hand_examples():
    assert reference_overload([1170, 1170], L, C) == 400
    assert reference_overload([2400, 970], L, C) == 1430 == station_overload([2400, 970], L, C)[1]


def test_reference_limits():
    with pytest.raises(OracleLimitError):
        reference_overload([100] * 7, L, C)
    assert reference_overload([], L, C) == 0


@settings(max_examples=40)
@given(st.lists(st.integers(0, 1500), min_size=1, max_size=4))
def test_reference_matches_recursion_at_line_scale(loads):
    assert reference_overload(loads, L, C) == station_overload(loads, L, C)[1]


def test_no_failure_front_is_one_scenario_minimum():
    inst = make_instance([(1170,), (600,), (1100,), (800,)])
    sample = ScenarioSample((scenario(4),) * 2)
    (point,) = enumerate_pareto(inst, sample)
    assert point.re_sum == 0
    best = solve_one_scenario(inst, Budget(2000, "it"))
    assert point.obj(2)[0] == best.obj_wo


def test_three_vehicle_fixture():
    # A = 117 TU fails; B = 117 TU, C = 97 TU survive.
    # skipping A: any order of B, C plus a neutral ends with 20 TU
    # reinserting A: all six orders of A, B, C end with 40 TU
    inst = make_instance([(1170,), (1170,), (970,)], f_max=1)
    sample = ScenarioSample((scenario(3, failed={0}),))
    front = enumerate_pareto(inst, sample)
    assert [(p.wo_sum, p.re_sum) for p in front] == [(200, 1), (400, 0)]
    for p in front:
        ev = Evaluator(inst, sample.scenarios)
        ev.evaluate(p.witness)
        assert p.witness.key == (p.wo_sum, p.re_sum)


def test_limits_are_enforced():
    inst = make_instance([(970,)] * 8)
    with pytest.raises(OracleLimitError):
        enumerate_pareto(inst, ScenarioSample((scenario(8),)))
    small = make_instance([(970,)] * 3)
    with pytest.raises(OracleLimitError):
        enumerate_pareto(small, ScenarioSample((scenario(3),) * 9))


def _tiny(seed):
    inst = generate_instance(GeneratorConfig(n_vehicles=5, n_stations=2, f_max=1, lam=2,
                                             highrisk_ratio_range=(0.2, 0.4), seed=seed))
    return inst, sample_scenarios(inst, 3, seed)


@pytest.mark.parametrize("seed", [1, 2])
def test_front_is_mutually_non_dominated_with_valid_witnesses(seed):
    inst, sample = _tiny(seed)
    front = enumerate_pareto(inst, sample)
    keys = [(p.wo_sum, p.re_sum) for p in front]
    assert keys == sorted(set(keys))
    assert all(a[1] > b[1] for a, b in zip(keys, keys[1:]))
    for p in front:
        ev = Evaluator(inst, sample.scenarios)
        ev.evaluate(p.witness)
        assert p.witness.key == (p.wo_sum, p.re_sum)
        assert p.witness.violation_degree == 0


@pytest.mark.parametrize("seed", [3, 4])
def test_stmls_never_beats_the_oracle(seed):
    inst, sample = _tiny(seed)
    exact = [(p.wo_sum, p.re_sum) for p in enumerate_pareto(inst, sample)]
    for s in stmls(inst, sample, StmlsConfig(budget=Budget(3000, "it"), seed=seed)):
        assert any(weakly_dominates(e, s.key) for e in exact)


def test_write_front(tmp_path):
    inst = make_instance([(1170,), (1170,), (970,)], f_max=1)
    sample = ScenarioSample((scenario(3, failed={0}),))
    write_front(enumerate_pareto(inst, sample), 1, tmp_path / "f.csv")
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0].startswith("wo,re")
    assert len(lines) == 3
    assert lines[1].startswith("20.0,1")
