import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from resalloc.model import (ScenarioError, build_model, classify_rows, load_scenario,
                            models_equal, serialize, state_space_size, state_space_sizes,
                            weak_coupling_check)

from conftest import queueing_model, random_model


def test_fixture_fig1a_dimensions():
    m = load_scenario("fig1a")
    assert (m.num_pools, m.num_request_types, m.num_patterns) == (14, 4, 41)
    assert m.dummy.sum() == 4
    assert np.all(m.dummy[-4:])


def test_fixture_fig1b_and_fig2_load():
    b = load_scenario("fig1b")
    assert (b.num_pools, b.num_request_types) == (6, 2)
    f = load_scenario("fig2")
    assert f.num_request_types == 3
    assert f.dummy.sum() == 3


def test_queueing_example_has_five_patterns(qmodel):
    assert qmodel.num_patterns == 5
    assert [qmodel.dummy_of(r) for r in range(2)] == [3, 4]
    assert list(qmodel.patterns_of(1)) == [1, 2, 4]


def test_state_space_sizes_queueing(qmodel):
    assert state_space_size(qmodel, 1) == 3       # ceil(3/2) + 1
    assert state_space_size(qmodel, 0) == 4       # min(3, 3) + 1
    assert state_space_size(qmodel, 3) == 1       # dummy


def test_zero_pattern_not_dummy_rejected():
    doc = {"pools": [{"capacity": 1, "cost_rate": 0}],
           "request_types": [{"arrival_rate": 1, "reward": 1}],
           "patterns": [{"request_type": 1, "service_rate": 1, "weights": {"1": 0}}]}
    with pytest.raises(ScenarioError) as e:
        load_scenario(doc)
    assert e.value.invariant == "nonzero-pattern"


@pytest.mark.parametrize("mutate,invariant", [
    (lambda d: d["pools"][0].update(capacity=0), "positive"),
    (lambda d: d["pools"][0].update(capacity=1.5), "integer-capacity"),
    (lambda d: d["request_types"][0].update(arrival_rate=-1), "positive"),
    (lambda d: d["patterns"][0]["weights"].update({"1": 1.5}), "integer-weights"),
    (lambda d: d["pools"].append({"capacity": 2, "cost_rate": 0}), "no-zero-row"),
])
def test_invariant_violations_named(mutate, invariant):
    doc = {"pools": [{"capacity": 2, "cost_rate": 0.5}],
           "request_types": [{"arrival_rate": 1, "reward": 1}],
           "patterns": [{"request_type": 1, "service_rate": 1, "weights": {"1": 1}}]}
    mutate(doc)
    with pytest.raises(ScenarioError) as e:
        load_scenario(doc)
    assert invariant in e.value.invariant


def test_missing_field_is_schema_error():
    with pytest.raises(ScenarioError) as e:
        load_scenario({"pools": []})
    assert e.value.invariant == "schema"


def test_load_from_path_and_text(tmp_path, qmodel):
    doc = serialize(qmodel)
    p = tmp_path / "q.json"
    p.write_text(json.dumps(doc))
    assert models_equal(load_scenario(p), qmodel)
    assert models_equal(load_scenario(json.dumps(doc)), qmodel)


def test_classify_rows_queueing(qmodel):
    assert list(classify_rows(qmodel)) == [2, 2]


def test_classify_single_user_pool_type1():
    m = build_model([2, 2], [0, 0], [(1, 1)], [(0, 1, {0: 1}), (0, 1, {0: 1, 1: 1})])
    assert list(classify_rows(m)) == [2, 1]


def test_loss_network_links():
    # links a, b, c; type I may use {a} or {b, c}, type II uses {b, c}
    m = build_model([2, 2, 2], [0, 0, 0], [(1, 1), (1, 1)],
                    [(0, 1, {0: 1}), (0, 1, {1: 1, 2: 1}), (1, 1, {1: 1, 2: 1})])
    assert list(classify_rows(m)) == [1, 2, 2]


def test_weak_coupling():
    ok, bad = weak_coupling_check(queueing_model())
    assert not ok and bad == [0]
    m = build_model([2, 3], [0, 0], [(1, 1), (1, 1)], [(0, 1, {0: 1}), (1, 1, {1: 2}), (1, 1, {0: 1})])
    assert weak_coupling_check(m) == (True, [])
    single = build_model([1], [0], [(1, 1)], [(0, 1, {0: 1})])
    assert weak_coupling_check(single)[0]


def test_model_immutable(qmodel):
    with pytest.raises(ValueError):
        qmodel.capacities[0] = 7
    with pytest.raises(Exception):
        qmodel.name = "x"


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_roundtrip_and_state_sizes(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng)
    assert models_equal(load_scenario(serialize(m)), m)
    K = state_space_sizes(m)
    assert np.all(K[~m.dummy] >= 2) and np.all(K[m.dummy] == 1)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 5))
def test_structure_invariant_to_weight_scaling(seed, k):
    m = random_model(np.random.default_rng(seed))
    live = [i for i in range(m.num_patterns) if not m.dummy[i]]
    pats = [(int(m.owner[i]), float(m.service_rates[i]),
             {int(j): int(m.weights[j, i]) * k for j in m.pools_of(i)}) for i in live]
    m2 = build_model(m.capacities, m.cost_rates, list(zip(m.arrival_rates, m.rewards)), pats)
    assert np.array_equal(classify_rows(m), classify_rows(m2))
    assert weak_coupling_check(m) == weak_coupling_check(m2)
