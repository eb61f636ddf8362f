import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import planted_aug, planted_canonical
from santaclaus.auggraph import (AugInstance, AugSolution, Level, build_aug_instance,
                                 check_feasible, flow_from_optimum, sigma_bar)
from santaclaus.augment import initial_assignment
from santaclaus.instance import AdditiveOracle, InputError, Instance
from santaclaus.reduction import basic_id, canonicalize, complex_id, private_id


def _single(values, gamma=8.0):
    res = list(values)
    inst = Instance(["p"], res, {"p": AdditiveOracle(res, values)})
    return canonicalize(inst, gamma)


def test_everyone_covered_means_nothing_to_augment():
    canon = _single({"r1": 1.0})
    sigma = initial_assignment(canon)
    sigma["r1"] = basic_id("p")
    aug = build_aug_instance(canon, sigma, 2)
    assert aug.nothing_to_augment
    assert check_feasible(aug, AugSolution([{}, {}]), {"t"}, 1, 1).ok


def test_free_resource_gives_direct_path():
    canon = _single({"r1": 1.0})
    aug = build_aug_instance(canon, initial_assignment(canon), 1)
    lv = aug.levels[0]
    edges = set(lv.edges)
    b = f"b:{basic_id('p')}"
    assert {("s:r1", "r:r1"), ("r:r1", b), (b, "t")} <= edges


def test_linking_edges_per_level_pair():
    canon, _ = planted_canonical(0, k=2, m=4)
    sigma = {r: None for r in canon.resources}
    aug = build_aug_instance(canon, sigma, 2)
    assert len(aug.links) == 1
    assert len(aug.links[0]) == len(canon.complex)


def test_h_must_be_positive():
    canon = _single({"r1": 1.0})
    with pytest.raises(InputError):
        build_aug_instance(canon, initial_assignment(canon), 0)


def test_sigma_bar_drops_small_resources_of_complex():
    canon = _single({"r1": 1.0, "r2": 0.05, "r3": 0.05})
    c, b = complex_id("p"), basic_id("p")
    sigma = {"r1": b, "r2": c, "r3": c, private_id("p"): c}
    sb = sigma_bar(canon, sigma)
    assert sb == {"r1": b, "r2": None, "r3": None, private_id("p"): c}


@given(st.integers(0, 2 ** 32 - 1))
def test_sigma_bar_rule(seed):
    rng = np.random.default_rng(seed)
    canon, _ = planted_canonical(int(rng.integers(1000)), k=2, m=4)
    sigma = {r: (None if rng.random() < 0.3 else canon.players[int(rng.integers(4))])
             for r in canon.resources}
    sb = sigma_bar(canon, sigma)
    for r, q in sigma.items():
        keep = q is not None and canon.valuations[q].evaluate([r]) >= 1 - 1e-9
        assert sb[r] == (q if keep else None)


def test_zero_flow_checks():
    canon = _single({"r1": 1.0})
    aug = build_aug_instance(canon, initial_assignment(canon), 1)
    assert check_feasible(aug, AugSolution([{}]), set(), 1, 1).ok
    v = check_feasible(aug, AugSolution([{}]), {"t"}, 1, 1)
    assert not v.ok and v.kind == "coverage" and v.where == "t"


def test_conservation_and_congestion_reported():
    lv = Level([("s", "a"), ("a", "t")], ["s"], ["t"],
               {"t": AdditiveOracle([1], {1: 1.0})})
    aug = AugInstance([lv], [])
    assert check_feasible(aug, AugSolution([{0: 1}]), set(), 1, 1).kind == "conservation"
    assert check_feasible(aug, AugSolution([{0: 2, 1: 2}]), {"t"}, 1, 1).kind == "congestion"
    assert check_feasible(aug, AugSolution([{0: 1, 1: 1}]), {"t"}, 1, 1).ok


def test_level_shape_rules():
    with pytest.raises(InputError):
        Level([("s", "a"), ("s", "b")], ["s"], ["a"], {}).check()
    lv = Level([("s", "t")], ["s"], ["t"], {})
    with pytest.raises(InputError):
        AugInstance([lv, Level([("s", "t")], ["s"], ["t"], {})], [{"t": "zz"}])


@pytest.mark.parametrize("h", [1, 2, 3])
@pytest.mark.parametrize("seed", range(8))
def test_flow_from_planted_optimum_is_feasible(h, seed):
    canon, opt, aug = planted_aug(seed, h=h, k=3, m=6)
    sol = flow_from_optimum(canon, aug, opt)
    assert check_feasible(aug, sol, {"t"}, 1, 1).ok


@given(st.integers(0, 10_000), st.integers(1, 3))
def test_build_invariants(seed, h):
    rng = np.random.default_rng(seed)
    canon, _ = planted_canonical(seed, k=2, m=5)
    sigma = {r: (None if rng.random() < 0.5 else canon.players[int(rng.integers(4))])
             for r in canon.resources}
    aug = build_aug_instance(canon, sigma, h)
    for lv in aug.levels:
        for s in lv.sources:
            assert len(lv.out_edges.get(s, [])) <= 1 and not lv.in_edges.get(s)
        for t in lv.sinks:
            assert not lv.out_edges.get(t)
        # free-resource sources always have their one out-edge
        assert all(len(lv.out_edges[s]) == 1 for s in lv.sources if s.startswith("s:"))
    for link in aug.links:
        assert len(set(link.values())) == len(link)
    assert aug.n == sum(len(lv.vertices) for lv in aug.levels)
    json.dumps(aug.to_json())


def test_linked_sinks_is_injective():
    canon, _, aug = planted_aug(3, h=2, k=3, m=6)
    srcs = [s for s in aug.levels[0].sources if s.startswith("cs:")]
    for j in range(len(srcs) + 1):
        assert len(aug.linked_sinks(0, srcs[:j])) == j
