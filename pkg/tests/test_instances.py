from itertools import product
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from mmsr.instances import (GeneratorConfig, ParseError, ScenarioSample, generate_instance,
                            load_instance, load_sample, one_scenario_sample, parse_instance,
                            sample_scenarios, scenario_probability, write_instance, write_sample)
from mmsr.model import Scenario, validate_instance

from conftest import make_instance

DATA = Path(__file__).parent / "data"


def test_generation_is_deterministic():
    cfg = GeneratorConfig(n_vehicles=40, seed=7)
    assert generate_instance(cfg) == generate_instance(GeneratorConfig(n_vehicles=40, seed=7))
    assert generate_instance(cfg) != generate_instance(GeneratorConfig(n_vehicles=40, seed=8))


def test_default_fmax_and_pool_size():
    inst = generate_instance(GeneratorConfig(n_vehicles=200, seed=1))
    assert inst.f_max == 10
    assert len(inst.old_pool) == 10
    assert inst.cycle == 970 and inst.lam == 10


def test_station_one_within_table_bounds():
    inst = generate_instance(GeneratorConfig(n_vehicles=300, seed=3))
    times = [v.processing_times[0] for v in inst.vehicles]
    assert min(times) >= 426 and max(times) <= 1172
    mean = sum(times) / len(times) / 10
    assert abs(mean - 94.1) <= 0.05 * 94.1


@settings(max_examples=20)
@given(st.integers(0, 10**6), st.integers(20, 80))
def test_generated_instances_validate(seed, n):
    inst = generate_instance(GeneratorConfig(n_vehicles=n, seed=seed))
    assert validate_instance(inst) == []
    pool_gids = range(n, n + len(inst.old_pool))
    for o in inst.old_pool:
        assert 1 <= o.wait_days <= o.slack_days <= 9
    assert all(10 <= inst.ready_offsets[v] <= n - 10 for v in range(n))
    assert all(0 <= inst.ready_offsets[g] <= n - 10 for g in pool_gids)


def test_bad_config_rejected():
    with pytest.raises(ValueError, match="invalid generator config"):
        generate_instance(GeneratorConfig(n_vehicles=50, highrisk_ratio_range=(0.5, 0.1)))


def test_no_highrisk_no_pool_gives_only_the_nominal_scenario():
    inst = make_instance([(970,)] * 4)
    sample = sample_scenarios(inst, 30, 5)
    assert set(sample.scenarios) == {Scenario((True,) * 4, ())}


def test_only_high_risk_vehicles_fail():
    inst = generate_instance(GeneratorConfig(n_vehicles=60, highrisk_ratio_range=(0.2, 0.3), seed=2))
    sample = sample_scenarios(inst, 200, 9)
    assert len(sample) == 200
    for sc in sample.scenarios:
        assert all(inst.vehicles[v].risk_class == "high" for v in sc.failed_new)
        assert len(sc.old_present) <= inst.f_max
    assert sample == sample_scenarios(inst, 200, 9)


def test_failure_frequency_matches_probability():
    inst = make_instance([(970,)], risk=["high"], probs=[0.3])
    sample = sample_scenarios(inst, 10**5, 11)
    freq = sum(1 for sc in sample.scenarios if sc.failed_new) / len(sample)
    assert abs(freq - 0.3) <= 0.01


def test_sample_size_must_be_positive():
    with pytest.raises(ValueError):
        sample_scenarios(make_instance([(970,)]), 0, 0)


def test_one_scenario_sample_has_no_failures():
    inst = make_instance([(970,)] * 3, risk=["high"] * 3, probs=[0.5] * 3)
    (sc,) = one_scenario_sample(inst).scenarios
    assert sc.failed(3) == ()


def test_single_failure_probability():
    inst = make_instance([(970,)], f_max=1, risk=["high"], probs=[0.3], old=[((970,), 1, 2, 0)])
    assert scenario_probability(inst, Scenario((False,), ())) == pytest.approx(0.15)


def test_certain_scenario_has_probability_one():
    inst = make_instance([(970,)] * 3)
    assert scenario_probability(inst, Scenario((True,) * 3, ())) == 1.0


def test_probabilities_sum_to_one():
    inst = make_instance([(970,)] * 3, f_max=1, risk=["high"] * 3, probs=[0.3, 0.1, 0.25],
                         old=[((970,), 1, 2, 0)])
    total = sum(scenario_probability(inst, Scenario(mask, old))
                for mask in product([True, False], repeat=3) for old in [(), (0,)])
    assert total == pytest.approx(1.0)


def test_instance_round_trip(tmp_path):
    inst = generate_instance(GeneratorConfig(n_vehicles=25, seed=4))
    p = tmp_path / "i.mmsr"
    write_instance(inst, p)
    assert load_instance(p) == inst
    write_instance(load_instance(p), tmp_path / "j.mmsr")
    assert (tmp_path / "j.mmsr").read_bytes() == p.read_bytes()


def test_sample_round_trip(tmp_path):
    inst = generate_instance(GeneratorConfig(n_vehicles=25, highrisk_ratio_range=(0.3, 0.4), seed=4))
    sample = sample_scenarios(inst, 15, 3)
    write_sample(sample, inst, tmp_path / "s.txt")
    assert load_sample(tmp_path / "s.txt", inst) == sample


def test_missing_lambda_is_named():
    text = (DATA / "three.mmsr").read_text().replace("lambda 2\n", "")
    with pytest.raises(ParseError, match="lambda"):
        parse_instance(text)


def test_bad_time_names_line():
    text = (DATA / "three.mmsr").read_text().replace("110.5", "11x")
    with pytest.raises(ParseError, match=r":11: .*processing time"):
        parse_instance(text, "f")


def test_fixture_fields():
    inst = load_instance(DATA / "three.mmsr")
    assert inst.n == 3 and inst.n_stations == 2
    assert inst.lengths == (2400, 1200)
    assert inst.lam == 2 and inst.f_max == 1 and inst.lead_time == 9
    a, b, c = inst.vehicles
    assert (a.id, a.is_ev, a.risk_class, a.failure_prob, a.ready_offset) == (11, True, "high", 0.3, 1)
    assert a.processing_times == (1105, 900)
    assert b.processing_times == (600, 1002)
    assert c.failure_prob == 0.25
    (old,) = inst.old_pool
    assert (old.vehicle.id, old.wait_days, old.slack_days) == (14, 2, 4)
    assert not old.is_due
    assert inst.vehicle_id(3) == 14
    assert validate_instance(inst) == []


def test_sample_file_with_unknown_vehicle(tmp_path):
    inst = load_instance(DATA / "three.mmsr")
    p = tmp_path / "s.txt"
    p.write_text("SAMPLE v1\nn 1\nseed 0\nscenario 0 fails:99 old:\n")
    with pytest.raises(ParseError):
        load_sample(p, inst)
    p.write_text("SAMPLE v1\nn 1\nseed 0\nscenario 0 fails:11 old:0\n")
    assert load_sample(p, inst) == ScenarioSample((Scenario((False, True, True), (0,)),), 0)
