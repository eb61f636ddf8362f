import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import KINDS, random_oracle
from santaclaus.instance import (AdditiveOracle, CapabilityError, CoverageOracle,
                                 ExplicitTableOracle, InputError, Instance,
                                 TruncatedAdditiveOracle, all_subset_values, check_submodular,
                                 evaluate, instance_from_json, instance_to_json, marginal)


def test_additive_sum():
    f = AdditiveOracle(["r1", "r2"], {"r1": 1.0, "r2": 0.5})
    assert evaluate(f, {"r1", "r2"}) == 1.5


@pytest.mark.parametrize("kind", KINDS)
def test_empty_bundle_is_zero(kind):
    f = random_oracle(kind, ["a", "b", "c"], np.random.default_rng(1))
    assert evaluate(f, set()) == 0


def test_truncated_caps():
    f = TruncatedAdditiveOracle(["r1", "r2"], {"r1": 0.8, "r2": 0.8}, 1.0)
    assert evaluate(f, {"r1", "r2"}) == 1.0


def test_unknown_resource_rejected():
    f = AdditiveOracle(["r1"], {"r1": 1.0})
    with pytest.raises(InputError):
        evaluate(f, {"zz"})


def test_check_submodular_additive_ok():
    assert check_submodular(AdditiveOracle(["a", "b", "c"], {"a": 1, "b": 2, "c": 0.5})).ok


def test_check_submodular_supermodular_pair():
    table = {frozenset(): 0, frozenset("a"): 0, frozenset("b"): 0, frozenset("ab"): 1}
    f = ExplicitTableOracle(["a", "b"], table, validate=False)
    v = check_submodular(f)
    assert not v.ok
    assert (v.A, v.B, v.r) == (frozenset(), frozenset({"b"}), "a")


def test_check_submodular_truncated_ok():
    f = TruncatedAdditiveOracle(list("abcd"), {r: 0.4 for r in "abcd"}, 1.0)
    assert check_submodular(f).ok


def test_check_submodular_too_large():
    f = AdditiveOracle([f"r{j}" for j in range(21)], {})
    with pytest.raises(CapabilityError):
        check_submodular(f)


def test_explicit_table_validates_on_construction():
    table = {frozenset(): 0, frozenset("a"): 0, frozenset("b"): 0, frozenset("ab"): 1}
    with pytest.raises(InputError):
        ExplicitTableOracle(["a", "b"], table)


def test_marginals():
    assert marginal(AdditiveOracle(["r1"], {"r1": 1.0}), set(), "r1") == 1.0
    f = TruncatedAdditiveOracle(["r1", "r2"], {"r1": 0.8, "r2": 0.8}, 1.0)
    assert marginal(f, {"r1"}, "r2") == pytest.approx(0.2)
    g = CoverageOracle(["r1", "r2"], {"r1": ["e"], "r2": ["e"]}, {"e": 1.0})
    assert marginal(g, {"r1"}, "r2") == 0.0
    with pytest.raises(InputError):
        marginal(g, {"r1"}, "r1")


def test_query_counter():
    f = AdditiveOracle(["a", "b"], {"a": 1.0})
    before = f.queries
    for k in range(7):
        f.evaluate(["a"])
        assert f.queries == before + k + 1


def test_instance_rejects_duplicates():
    f = AdditiveOracle(["r"], {})
    with pytest.raises(InputError):
        Instance(["p", "p"], ["r"], {"p": f})
    with pytest.raises(InputError):
        Instance(["p", "q"], ["r"], {"p": f})


@pytest.mark.parametrize("kind", KINDS)
def test_json_round_trip(kind):
    rng = np.random.default_rng(3)
    res = ["a", "b", "c"]
    inst = Instance(["p", "q"], res, {p: random_oracle(kind, res, rng) for p in "pq"})
    back = instance_from_json(json.loads(json.dumps(instance_to_json(inst))))
    for p in "pq":
        assert np.allclose(all_subset_values(back.valuations[p]),
                           all_subset_values(inst.valuations[p]))


@given(st.sampled_from(KINDS), st.integers(1, 7), st.integers(0, 2 ** 32 - 1))
def test_constructed_oracles_are_monotone_submodular(kind, n, seed):
    f = random_oracle(kind, [f"r{j}" for j in range(n)], np.random.default_rng(seed))
    assert check_submodular(f).ok


@given(st.sampled_from(KINDS), st.integers(0, 2 ** 32 - 1))
def test_monotone_on_sampled_pairs(kind, seed):
    rng = np.random.default_rng(seed)
    ground = [f"r{j}" for j in range(8)]
    f = random_oracle(kind, ground, rng)
    for _ in range(1000 // 50):
        A = {r for r in ground if rng.random() < 0.5}
        rest = [r for r in ground if r not in A]
        if rest:
            r = rest[int(rng.integers(len(rest)))]
            assert f.evaluate(A) <= f.evaluate(A | {r}) + 1e-12


@given(st.dictionaries(st.sampled_from("abcdef"), st.floats(0, 10), min_size=1))
def test_additive_is_sum_of_singletons(values):
    ground = list("abcdef")
    f = AdditiveOracle(ground, values)
    A = set(values)
    assert f.evaluate(A) == pytest.approx(sum(f.evaluate([r]) for r in A), abs=1e-9)
