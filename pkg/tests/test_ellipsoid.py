import itertools
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog

from santaclaus.ellipsoid import (ContractError, iteration_budget, optimize_with_binary_search,
                                  solve_feasibility)


def halfspace_oracle(A, c, tol=0.0):
    def oracle(x):
        viol = A @ x - c
        j = int(np.argmax(viol))
        if viol[j] <= tol:
            return None
        return A[j], c[j]
    return oracle


def test_unit_interval():
    A, c = np.array([[1.0], [-1.0]]), np.array([1.0, 0.0])
    res = solve_feasibility(1, 10.0, 1e-6, halfspace_oracle(A, c), center=[5.0])
    assert res.feasible and 0 <= res.point[0] <= 1


def test_empty_box():
    A, c = np.array([[-1.0], [1.0]]), np.array([0.0, -1.0])
    res = solve_feasibility(1, 10.0, 1e-6, halfspace_oracle(A, c))
    assert res.status == "infeasible"


def test_budget_status_distinct():
    A, c = np.array([[-1.0], [1.0]]), np.array([0.0, -1.0])
    res = solve_feasibility(1, 10.0, 1e-6, halfspace_oracle(A, c), max_iter=3)
    assert res.status == "budget" and res.iterations == 3


def test_bad_cut_is_a_contract_error():
    with pytest.raises(ContractError):
        solve_feasibility(2, 1.0, 1e-3, lambda x: (np.array([1.0, 0.0]), 5.0))


def test_transcript_serialisable():
    A, c = np.array([[1.0, 1.0]]), np.array([-3.0])
    res = solve_feasibility(2, 10.0, 1e-2, halfspace_oracle(A, c), record=True)
    assert res.feasible and res.transcript
    json.dumps(res.to_json())


def test_iteration_budget_formula():
    assert iteration_budget(2, np.e, 1.0) == 18


def _vertices(A, c):
    """All vertices of {A x <= c} in 3-D, by enumerating constraint triples."""
    out = []
    for rows in itertools.combinations(range(len(A)), 3):
        M = A[list(rows)]
        if abs(np.linalg.det(M)) < 1e-9:
            continue
        x = np.linalg.solve(M, c[list(rows)])
        if np.all(A @ x <= c + 1e-9):
            out.append(x)
    return out


def _random_polytope(rng):
    box = np.vstack([np.eye(3), -np.eye(3)])
    extra = rng.normal(size=(int(rng.integers(1, 6)), 3))
    extra /= np.linalg.norm(extra, axis=1, keepdims=True)
    A = np.vstack([box, extra])
    c = np.concatenate([np.ones(6), rng.uniform(-0.9, 0.6, size=len(extra))])
    return A, c


def _chebyshev_radius(A, c):
    norms = np.linalg.norm(A, axis=1)
    res = linprog([0, 0, 0, -1], A_ub=np.hstack([A, norms[:, None]]), b_ub=c,
                  bounds=[(None, None)] * 3 + [(0, None)], method="highs")
    return -res.fun if res.status == 0 else 0.0


@pytest.mark.parametrize("seed", range(50))
def test_feasibility_vs_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    A, c = _random_polytope(rng)
    radius = _chebyshev_radius(A, c)
    if 0 < radius < 1e-3:
        pytest.skip("too thin to decide at this inner radius")
    expect = bool(_vertices(A, c))
    res = solve_feasibility(3, 2.0, 1e-4, halfspace_oracle(A, c))
    assert res.feasible == expect
    if res.feasible:
        assert np.all(A @ res.point <= c + 1e-7)


def test_maximise_over_interval():
    A, c = np.array([[1.0], [-1.0]]), np.array([1.0, 0.0])
    res = optimize_with_binary_search([1.0], 1, 4.0, 1e-6, halfspace_oracle(A, c), eps=1e-4)
    assert res.point[0] >= 1 - 1e-3


def test_zero_objective():
    A, c = np.array([[1.0], [-1.0]]), np.array([1.0, 0.0])
    res = optimize_with_binary_search([0.0], 1, 4.0, 1e-6, halfspace_oracle(A, c))
    assert res.feasible and 0 <= res.point[0] <= 1


@given(st.integers(0, 2 ** 32 - 1))
def test_optimise_vs_vertices(seed):
    rng = np.random.default_rng(seed)
    A, c = _random_polytope(rng)
    verts = _vertices(A, c)
    if not verts or _chebyshev_radius(A, c) < 0.05:
        return
    w = rng.normal(size=3)
    best = max(float(w @ v) for v in verts)
    eps = 1e-2
    res = optimize_with_binary_search(w, 3, 2.0, 1e-5, halfspace_oracle(A, c), eps=eps)
    assert res.feasible
    assert float(w @ res.point) >= best - eps - 1e-6
