import random

import pytest
from hypothesis import given, strategies as st

from mmsr.evaluator import (Evaluator, Move, build_final_sequence, delta_evaluate, evaluate,
                            sequence_overload, station_overload, station_states)
from mmsr.instances import GeneratorConfig, ScenarioSample, generate_instance, sample_scenarios
from mmsr.model import SKIP, ContractViolation, Solution
from mmsr.oracle import reference_overload
from mmsr.search import apply_operator, random_plan

from conftest import make_instance, scenario

L, C = 1200, 970


# -- station_overload --------------------------------------------------------

def test_loads_matching_cycle_have_no_overload():
    assert station_overload([C] * 5, L, C) == ([0] * 5, 0)


def test_two_long_loads():
    # z2 = 20 TU, then the last position must end by the cycle: 20 + 117 - 97
    assert station_overload([1170, 1170], L, C) == ([0, 400], 400)


def test_overflow_restarts_at_length_minus_cycle():
    w, total = station_overload([2400, 970], L, C)
    assert w == [1200, 230]
    assert total == 1430


def test_negative_load_rejected():
    with pytest.raises(ContractViolation):
        station_overload([100, -1], L, C)


def test_short_station_rejected():
    with pytest.raises(ContractViolation):
        station_overload([100], 900, C)


@given(st.lists(st.integers(0, 400), min_size=1, max_size=6), st.integers(40, 80),
       st.integers(0, 60))
def test_matches_exhaustive_reference(loads, c, extra):
    length = c + extra
    assert station_overload(loads, length, c)[1] == reference_overload(loads, length, c)


@given(st.lists(st.integers(0, 2500), min_size=1, max_size=12))
def test_appending_neutral_after_empty_station_is_free(loads):
    # a neutral load equals the cycle, so a station left with z = 0 stays balanced
    w, total = station_overload(loads + [C], L, C)
    states_z = 0
    for b, wt in zip(loads, w):
        x = states_z + b - wt
        states_z = max(0, x - C)
    if states_z == 0:
        w2, total2 = station_overload(loads + [C, C], L, C)
        assert total2 == total


# -- final sequence ----------------------------------------------------------

def five_with_old():
    # A..E are gids 0..4; the old vehicle X is gid 5
    return make_instance([(970,)] * 5, f_max=1, old=[((970,), 2, 5, 0)])


def test_identity_when_nothing_fails():
    inst = make_instance([(970,)] * 4)
    fs = build_final_sequence([2, 0, 3, 1], scenario(4), {}, inst)
    assert fs.entries == ((2, False), (0, False), (3, False), (1, False))


def test_failure_and_old_reinsertion():
    inst = five_with_old()
    sc = scenario(5, failed={2}, old=(0,))
    final = build_final_sequence([0, 1, 2, 3, 4], sc, {2: SKIP, 5: 2}, inst)
    # A, X, B, D, E, then C as a neutral vehicle
    assert final.entries == ((0, False), (5, False), (1, False), (3, False), (4, False), (2, True))
    assert len(final) == 6


def test_insert_goes_before_first_survivor_at_or_after_target():
    # B fails and is reinserted at 3; the survivor originally at 3 is C, so B precedes it
    inst = make_instance([(970,)] * 3, f_max=1)
    final = build_final_sequence([0, 1, 2], scenario(3, failed={1}), {1: 3}, inst)
    assert final.vehicles == [0, 1, 2]


def test_insert_past_last_survivor_is_appended():
    inst = make_instance([(970,)] * 3, f_max=1)
    final = build_final_sequence([0, 2, 1], scenario(3, failed={1}), {1: 3}, inst)
    assert final.vehicles == [0, 2, 1]


def test_plan_must_cover_failed_vehicles():
    inst = make_instance([(970,)] * 3, f_max=1)
    with pytest.raises(ContractViolation):
        build_final_sequence([0, 1, 2], scenario(3, failed={1}), {}, inst)


def test_reinsertion_before_ready_names_vehicle():
    inst = make_instance([(970,)] * 3, f_max=1, ready=[0, 2, 0])
    with pytest.raises(ContractViolation, match="vehicle 2"):
        build_final_sequence([0, 1, 2], scenario(3, failed={1}), {1: 2}, inst)


def test_station_states_start_at_zero():
    inst = make_instance([(1170,), (1170,)])
    states = station_states(build_final_sequence([0, 1], scenario(2), {}), inst)
    assert states.start_z == [[0, 200]]
    assert states.overload_w == [[0, 400]]


# -- evaluate ----------------------------------------------------------------

def test_no_failure_sample_matches_deterministic_overload():
    inst = make_instance([(1170,), (1170,), (800,)])
    sample = ScenarioSample((scenario(3), scenario(3)))
    sol = Solution([0, 1, 2], [{}, {}], 2)
    point = evaluate(sol, inst, sample)
    assert point.re == 0
    assert sol.wo_sum == 2 * station_overload([1170, 1170, 800], L, C)[1]


def test_skipped_old_vehicle_penalty():
    inst = make_instance([(970,)] * 2, f_max=1, old=[((970,), 3, 5, 0)])
    sample = ScenarioSample((scenario(2, old=(0,)),))
    sol = Solution([0, 1], [{2: SKIP}], 1)
    assert evaluate(sol, inst, sample).re == 16


def test_two_handcrafted_scenarios():
    # 3 vehicles, 1 station: loads 117, 100, 60 TU
    inst = make_instance([(1170,), (1000,), (600,)], f_max=1)
    sample = ScenarioSample((scenario(3), scenario(3, failed={1})))
    sol = Solution([0, 1, 2], [{}, {1: SKIP}], 2)
    p = evaluate(sol, inst, sample)
    # scenario 1: z2 = 20, z3 = 23, last 23 + 60 - 97 < 0 -> 0
    # scenario 2: z2 = 20, z3 = 0, neutral last -> 0
    assert station_overload([1170, 1000, 600], L, C) == ([0, 0, 0], 0)
    assert station_overload([1170, 600, C], L, C) == ([0, 0, 0], 0)
    assert p.wo == 0 and p.re == 0.5


def test_evaluate_rejects_plan_scenario_mismatch():
    inst = make_instance([(970,)] * 3, f_max=1)
    sample = ScenarioSample((scenario(3, failed={1}),))
    with pytest.raises(ContractViolation):
        evaluate(Solution([0, 1, 2], [{}], 1), inst, sample)
    with pytest.raises(ContractViolation):
        evaluate(Solution([0, 1, 2], [{1: 0}, {}], 2), inst, sample)


def test_swap_of_identical_vehicles_leaves_objectives():
    inst = make_instance([(1170,), (1170,), (600,)])
    sample = ScenarioSample((scenario(3),))
    sol = Solution([0, 1, 2], [{}], 1)
    before = evaluate(sol, inst, sample)
    after = delta_evaluate(sol, inst, sample, Move(apply_operator([0, 1, 2], "swap", 1, 2)))
    assert before == after


def _random_case(seed):
    rng = random.Random(seed)
    n = rng.randint(2, 12)
    cfg = GeneratorConfig(n_vehicles=n, n_stations=rng.randint(1, 5), f_max=rng.randint(0, 2),
                          lam=rng.randint(1, 4), highrisk_ratio_range=(0.2, 0.5), seed=seed)
    inst = generate_instance(cfg)
    sample = sample_scenarios(inst, rng.randint(1, 4), seed)
    return rng, inst, sample


@given(st.integers(0, 10**6))
def test_wo_is_mean_of_single_scenario_evaluations(seed):
    rng, inst, sample = _random_case(seed)
    ev = Evaluator(inst, sample.scenarios)
    fs = list(range(inst.n))
    rng.shuffle(fs)
    plans = [random_plan(fs, w, ev, rng) for w in range(ev.N)]
    sol = Solution(fs, plans, ev.N)
    ev.evaluate(sol)
    parts = 0
    for w, sc in enumerate(sample.scenarios):
        one = Solution(fs, [plans[w]], 1)
        evaluate(one, inst, ScenarioSample((sc,)))
        parts += one.wo_sum
        final = build_final_sequence(fs, sc, plans[w])
        tokens = [g if not neutral else ~g for g, neutral in final.entries]
        assert sequence_overload(tokens, inst) == one.wo_sum
    assert parts == sol.wo_sum


@given(st.integers(0, 10**6), st.integers(0, 4), st.integers(1, 500))
def test_raising_a_processing_time_never_lowers_wo(seed, k, bump):
    rng, inst, sample = _random_case(seed)
    k %= inst.n_stations
    v = rng.randrange(inst.n)
    fs = list(range(inst.n))
    ev = Evaluator(inst, sample.scenarios)
    plans = [random_plan(fs, w, ev, rng) for w in range(ev.N)]
    base = Solution(fs, plans, ev.N)
    ev.evaluate(base)
    veh = inst.vehicles[v]
    times = list(veh.processing_times)
    times[k] += bump
    from dataclasses import replace
    bigger = replace(inst, vehicles=inst.vehicles[:v] + (replace(veh, processing_times=tuple(times)),)
                     + inst.vehicles[v + 1:])
    sol = Solution(fs, plans, ev.N)
    Evaluator(bigger, sample.scenarios).evaluate(sol)
    assert sol.wo_sum >= base.wo_sum


def test_delta_matches_full_on_random_moves():
    """Partial re-sweeps agree exactly with full evaluation (first and second stage)."""
    from mmsr.search import flip_decision
    from mmsr.feasibility import positions_of, random_position, ready_bound
    trials = 0
    for seed in range(200):
        rng, inst, sample = _random_case(seed)
        ev = Evaluator(inst, sample.scenarios)
        fs = list(range(inst.n))
        rng.shuffle(fs)
        sol = Solution(fs, [random_plan(fs, w, ev, rng) for w in range(ev.N)], ev.N)
        ev.evaluate(sol)
        for _ in range(25):
            if rng.random() < 0.5 and inst.n >= 2:
                op = rng.choice(["swap", "insert_fwd", "insert_back", "inversion"])
                i, j = sorted(rng.sample(range(1, inst.n + 1), 2))
                if op == "insert_back":
                    i, j = j, i
                new_fs = apply_operator(sol.first_stage, op, i, j)
                # keep plans ready-feasible for the new order
                pos = positions_of(new_fs)
                plans = {}
                for w, p in enumerate(sol.plans):
                    q = {g: (t if t == SKIP or t >= ready_bound(inst, g, pos) else SKIP)
                         for g, t in p.items()}
                    if q != p:
                        plans[w] = q
                move = Move(new_fs, plans)
            else:
                w = rng.randrange(ev.N)
                plan = flip_decision(sol, w, ev, rng)
                if plan is None:
                    g_list = [g for g, t in sol.plans[w].items() if t != SKIP]
                    if not g_list:
                        continue
                    g = rng.choice(g_list)
                    others = [t for h, t in sol.plans[w].items() if h != g and t != SKIP]
                    t = random_position(g, ready_bound(inst, g, positions_of(sol.first_stage)),
                                        others, inst, rng)
                    if t is None:
                        continue
                    plan = dict(sol.plans[w])
                    plan[g] = t
                move = Move(None, {w: plan})
            trial = ev.trial(sol, move)
            moved = Solution(list(move.first_stage or sol.first_stage),
                             [move.plans.get(w, p) for w, p in enumerate(sol.plans)], ev.N)
            Evaluator(inst, sample.scenarios).evaluate(moved)
            assert (trial.wo_sum, trial.re_sum, trial.violation_degree) == \
                (moved.wo_sum, moved.re_sum, moved.violation_degree)
            # moves confined to one scenario change only that scenario's term
            if move.first_stage is None:
                before = ev.scenario_totals(sol)
                after = Evaluator(inst, sample.scenarios).scenario_totals(moved)
                changed = {w for w in range(ev.N) if before[w] != after[w]}
                assert changed <= set(move.plans)
            if rng.random() < 0.5:
                ev.commit(sol, trial)
                fresh = Solution(list(sol.first_stage), [dict(p) for p in sol.plans], ev.N)
                Evaluator(inst, sample.scenarios).evaluate(fresh)
                assert fresh.key == sol.key
            trials += 1
    assert trials >= 3000
