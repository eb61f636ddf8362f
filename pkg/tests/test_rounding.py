import pytest

from helpers import hub_witness, planted_aug
from santaclaus.auggraph import check_feasible, flow_from_optimum
from santaclaus.clp import Column, empty_witness, unit_witness
from santaclaus.flowcore import unit_paths
from santaclaus.rounding import (RoundingError, gamma_schedule, round_all_levels, round_level,
                                 sample_columns)


def test_single_configuration_copied():
    aug, w = hub_witness(1, 1, 1)
    lr = round_level(aug, w, gamma=1.0)
    assert lr.flow == w.columns[0].g and lr.congestion == 1 and lr.attempts == 1
    assert lr.next_sinks == ("u0_0",)


def test_empty_sink_set_gives_zero_flow():
    aug, _ = hub_witness(1, 1, 1)
    rep = round_all_levels(aug, empty_witness(0), 1.0)
    assert rep.solution.flows == [{}, {}]


def test_gamma_schedule():
    assert gamma_schedule(600, 16, 3) == pytest.approx([600, 750, 937.5])


def test_samples_come_from_support():
    aug, w = hub_witness()
    support = {id(c) for c in w.columns}
    for att in range(20):
        chosen = sample_columns(w, seed=3, attempt=att)
        assert set(chosen) == set(w.sinks)
        for v, c in chosen.items():
            assert id(c) in support and c.sink == v


def test_sampling_is_reproducible():
    _, w = hub_witness()
    a = sample_columns(w, 7, 0)
    b = sample_columns(w, 7, 0)
    assert all(a[v] is b[v] for v in a)


def test_unnormalised_weights_are_renormalised():
    aug, w = hub_witness(2, 2, 2)
    w.weights = [3.0 * y for y in w.weights]
    for att in range(5):
        assert len(sample_columns(w, 0, att)) == 2


def test_failure_after_cap():
    aug, w = hub_witness()
    with pytest.raises(RoundingError) as exc:
        round_level(aug, w, gamma=0.5, attempts=3)
    assert exc.value.level == 0


def test_level_rounding_chernoff_rate():
    aug, w = hub_witness()
    ok = 0
    for seed in range(100):
        try:
            round_level(aug, w, gamma=6.0, seed=seed, attempts=1, n=2)
            ok += 1
        except RoundingError:
            pass
    assert ok >= 95


def _lift(aug, sol):
    """Integral witness reproducing a unit-congestion solution level by level."""
    def columns(i, sinks):
        lv = aug.levels[i]
        g = sol.flows[i]
        by_sink = {}
        for path in unit_paths(g, lv.edge_map, lv.sources, lv.sinks):
            v = lv.edges[path[-1]][1]
            for e in path:
                by_sink.setdefault(v, {})[e] = 1
        out = []
        for v in sorted(sinks):
            cg = by_sink.get(v, {})
            sub = None
            if i + 1 < aug.h:
                used = [s for s in lv.sources
                        if (e := lv.source_edge(s)) is not None and cg.get(e)]
                sub = unit_witness(i + 1, columns(i + 1, aug.linked_sinks(i, used)))
            out.append(Column(v, i, cg, sub))
        return out
    return unit_witness(0, columns(0, [aug.target]))


@pytest.mark.parametrize("seed", range(6))
def test_integral_witness_rounds_to_feasible_solution(seed):
    canon, opt, aug = planted_aug(seed, h=2, k=3, m=6)
    sol = flow_from_optimum(canon, aug, opt)
    rep = round_all_levels(aug, _lift(aug, sol), 1.0, seed=seed)
    assert check_feasible(aug, rep.solution, {"t"}, 1, 1).ok


def test_h_one_reduces_to_round_level():
    canon, opt, aug = planted_aug(0, h=1, k=2, m=4)
    sol = flow_from_optimum(canon, aug, opt)
    w = _lift(aug, sol)
    rep = round_all_levels(aug, w, 1.0)
    assert rep.solution.flows[0] == round_level(aug, w, 1.0).flow
