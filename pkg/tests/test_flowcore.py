import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from santaclaus.flowcore import (Bucket, QuantizationError, cancel_cycles, decompose,
                                 max_flow_integral, quantize_flow, recompose)
from santaclaus.instance import InputError


def test_unit_path():
    edges = {0: ("s", "a"), 1: ("a", "t")}
    paths = decompose({0: 1, 1: 1}, edges, ["s"], ["t"])
    assert [(p.edges, p.weight) for p in paths] == [((0, 1), 1)]


def test_zero_flow():
    assert decompose({}, {0: ("s", "t")}, ["s"], ["t"]) == []


def test_non_conserving_rejected():
    with pytest.raises(InputError):
        decompose({0: 1}, {0: ("s", "a"), 1: ("a", "t")}, ["s"], ["t"])


def test_cycles_cancelled():
    edges = {0: ("s", "a"), 1: ("a", "b"), 2: ("b", "a"), 3: ("a", "t")}
    flow = cancel_cycles({0: 1, 1: 2, 2: 2, 3: 1}, edges)
    assert flow == {0: 1, 3: 1}


def _random_dag_flow(rng, n=10, exact=False):
    """Sum of random weighted source-sink walks in a DAG on 0..n-1."""
    edges, eid = {}, {}
    flow = {}
    for _ in range(int(rng.integers(1, 6))):
        k = int(rng.integers(0, n - 2))
        mids = sorted(rng.choice(np.arange(1, n - 1), size=k, replace=False).tolist())
        walk = [0] + mids + [n - 1]
        w = Fraction(int(rng.integers(1, 7)), int(rng.integers(1, 4))) if exact else \
            int(rng.integers(1, 4))
        for u, v in zip(walk, walk[1:]):
            if (u, v) not in eid:
                eid[(u, v)] = len(edges)
                edges[eid[(u, v)]] = (u, v)
            e = eid[(u, v)]
            flow[e] = flow.get(e, 0) + w
    return edges, flow


@given(st.integers(0, 2 ** 32 - 1), st.booleans())
def test_decompose_recompose_identity(seed, exact):
    edges, flow = _random_dag_flow(np.random.default_rng(seed), exact=exact)
    paths = decompose(flow, edges, [0], [9])
    assert recompose(paths) == flow
    for p in paths:
        assert edges[p.first][0] == 0 and edges[p.last][1] == 9
    if not exact:
        assert len(paths) <= sum(x for e, x in flow.items() if edges[e][0] == 0)


def test_two_disjoint_paths():
    edges = {0: ("s", "a"), 1: ("a", "t"), 2: ("s", "b"), 3: ("b", "t")}
    value, _ = max_flow_integral(edges, {e: 1 for e in edges}, ["s"], ["t"])
    assert value == 2


def test_bottleneck():
    edges = {0: ("s", "a"), 1: ("s", "a"), 2: ("s", "a"), 3: ("a", "t")}
    value, flow = max_flow_integral(edges, {e: 1 for e in edges}, ["s"], ["t"])
    assert value == 1 and flow[3] == 1


def _brute_unit_max_flow(edges, s, t):
    """Best inflow at t over all conserving 0/1 edge subsets."""
    best = 0
    ids = list(edges)
    for bits in itertools.product((0, 1), repeat=len(ids)):
        net = {}
        for e, x in zip(ids, bits):
            if x:
                u, v = edges[e]
                net[u] = net.get(u, 0) - 1
                net[v] = net.get(v, 0) + 1
        if all(x == 0 for v, x in net.items() if v not in (s, t)):
            best = max(best, net.get(t, 0))
    return best


@given(st.integers(0, 2 ** 32 - 1))
def test_max_flow_matches_exhaustive(seed):
    rng = np.random.default_rng(seed)
    nv = int(rng.integers(3, 13))
    pairs = [(u, v) for u in range(nv) for v in range(u + 1, nv)]
    pick = rng.permutation(len(pairs))[:min(len(pairs), 12)]
    edges = {j: pairs[k] for j, k in enumerate(sorted(pick.tolist()))}
    value, flow = max_flow_integral(edges, {e: 1 for e in edges}, [0], [nv - 1])
    assert value == _brute_unit_max_flow(edges, 0, nv - 1)
    assert all(0 <= x <= 1 for x in flow.values())


@given(st.integers(0, 2 ** 32 - 1))
def test_max_flow_monotone_in_capacity(seed):
    rng = np.random.default_rng(seed)
    edges, _ = _random_dag_flow(rng)
    caps = {e: int(rng.integers(0, 3)) for e in edges}
    more = {e: c + int(rng.integers(0, 2)) for e, c in caps.items()}
    assert max_flow_integral(edges, caps, [0], [9])[0] <= max_flow_integral(edges, more, [0], [9])[0]


def test_single_bucket_floor_ceil():
    edges = {0: ("s1", "v"), 1: ("s2", "v"), 2: ("s3", "v")}
    frac = {0: Fraction(1, 2), 1: Fraction(1, 2), 2: Fraction(1, 2)}
    out = quantize_flow(frac, edges, ["s1", "s2", "s3"], ["v"], [Bucket((0, 1, 2))],
                        targets={"v": 1})
    assert sum(out.values()) in (1, 2)


def test_integral_input_unchanged():
    edges = {0: ("s", "a"), 1: ("a", "t"), 2: ("s2", "t")}
    flow = {0: 1, 1: 1, 2: 1}
    assert quantize_flow(flow, edges, ["s", "s2"], ["t"]) == flow


def test_infeasible_targets_reported():
    edges = {0: ("s", "t")}
    with pytest.raises(QuantizationError):
        quantize_flow({0: Fraction(1, 2)}, edges, ["s"], ["t"], targets={"t": 2})


def _bipartite(rng):
    """Sources s0..s3 -> middles a,b -> sink t; random fractional flow <= 1 per edge."""
    edges, flow = {}, {}
    for j in range(4):
        mid = "a" if j < 2 else "b"
        x = Fraction(int(rng.integers(0, 5)), 4)
        edges[j] = (f"s{j}", mid)
        if x:
            flow[j] = x
    ain = sum(flow.get(j, 0) for j in (0, 1))
    bin_ = sum(flow.get(j, 0) for j in (2, 3))
    # split middle outflow over two parallel edges each, capped at 1
    edges.update({4: ("a", "t"), 5: ("a", "t"), 6: ("b", "t"), 7: ("b", "t")})
    for e1, e2, tot in ((4, 5, ain), (6, 7, bin_)):
        first = min(Fraction(1), tot)
        if first:
            flow[e1] = first
        if tot - first:
            flow[e2] = tot - first
    return edges, flow


def _exhaustive_ok(edges, flow, buckets, target):
    """Is there a 0/1 flow meeting edge floors/ceilings, bucket bounds and the target?"""
    ids = sorted(edges)
    for bits in itertools.product((0, 1), repeat=len(ids)):
        g = dict(zip(ids, bits))
        if any(not (int(flow.get(e, 0)) <= g[e] <= -(-flow.get(e, 0) // 1)) for e in ids):
            continue
        if g[4] + g[5] != g[0] + g[1] or g[6] + g[7] != g[2] + g[3]:
            continue
        if any(not (sum(flow.get(e, 0) for e in b.edges) // 1 <= sum(g[e] for e in b.edges)
                    <= -(-sum(flow.get(e, 0) for e in b.edges) // 1)) for b in buckets):
            continue
        if g[4] + g[5] + g[6] + g[7] >= target:
            return True
    return False


@given(st.integers(0, 2 ** 32 - 1))
def test_quantize_two_buckets_vs_enumeration(seed):
    rng = np.random.default_rng(seed)
    edges, flow = _bipartite(rng)
    if not flow:
        return
    buckets = [Bucket((4, 5)), Bucket((6, 7))]
    inflow = sum(flow.get(e, 0) for e in (4, 5, 6, 7))
    target = -(-inflow // 1)
    srcs = [f"s{j}" for j in range(4)]
    expect = _exhaustive_ok(edges, flow, buckets, target)
    try:
        out = quantize_flow(flow, edges, srcs, ["t"], buckets, {"t": target})
    except QuantizationError:
        assert not expect
        return
    assert expect
    assert all(x in (0, 1) for x in out.values())
    for b in buckets:
        mass = sum(flow.get(e, 0) for e in b.edges)
        got = sum(out.get(e, 0) for e in b.edges)
        assert mass // 1 <= got <= -(-mass // 1)
    assert sum(out.get(e, 0) for e in (4, 5, 6, 7)) >= target
