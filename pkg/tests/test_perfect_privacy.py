import itertools

import numpy as np
import pytest
from scipy.optimize import linprog

from privbound import JointDistribution, Scenario, family_bsc, family_erasure, g0, polytope_vertices, report
from privbound.distribution import conditional_entropy, entropy

from conftest import ref_entropy, ref_h


def vertex_set(j):
    return sorted(tuple(np.round(v.q, 9)) for v in polytope_vertices(j))


def reference_g0(p):
    """Independent vertex enumeration by brute-force square solves, then HiGHS."""
    p = np.asarray(p)
    px, py = p.sum(1), p.sum(0)
    A = np.vstack([p / py, np.ones(p.shape[1])])
    b = np.append(px, 1.0)
    rank = np.linalg.matrix_rank(A)
    verts = []
    for cols in itertools.combinations(range(p.shape[1]), rank):
        sub = A[:, cols]
        if np.linalg.matrix_rank(sub) < rank:
            continue
        sol, *_ = np.linalg.lstsq(sub, b, rcond=None)
        if np.any(sol < -1e-10) or not np.allclose(sub @ sol, b, atol=1e-9):
            continue
        q = np.zeros(p.shape[1])
        q[list(cols)] = np.clip(sol, 0, None)
        if not any(np.allclose(q, v, atol=1e-9) for v in verts):
            verts.append(q)
    Q = np.array(verts).T
    costs = np.array([ref_entropy(v) for v in verts])
    res = linprog(costs, A_eq=Q, b_eq=py, bounds=(0, None), method="highs")
    return ref_entropy(py) - res.fun


def test_bsc_polytope_is_a_point():
    # P_{X|Y} invertible: S = {P_Y}
    assert vertex_set(family_bsc(0.2)) == [(0.5, 0.5)]
    assert g0(family_bsc(0.2)).value == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("theta", [0.1, 0.3])
def test_erasure_vertices_and_value(theta):
    j = family_erasure(theta)
    assert vertex_set(j) == [(0.0, 1.0, 0.0), (0.5, 0.0, 0.5)]
    res = g0(j)
    assert res.value == pytest.approx(ref_h(theta), abs=1e-6)
    assert res.mechanism.scenario is Scenario.HIDDEN


def test_function_family_vertices(parity4):
    verts = vertex_set(parity4)
    expected = sorted([(0.5, 0.5, 0.0, 0.0), (0.5, 0.0, 0.0, 0.5), (0.0, 0.5, 0.5, 0.0), (0.0, 0.0, 0.5, 0.5)])
    assert verts == expected
    assert g0(parity4).value == pytest.approx(1.0, abs=1e-9)


def test_independent_pair_attains_entropy_of_y():
    j = JointDistribution(np.outer([0.3, 0.7], [0.2, 0.5, 0.3]))
    assert g0(j).value == pytest.approx(entropy(j.py), abs=1e-9)


def test_vertices_lie_in_polytope(rng):
    for _ in range(10):
        p = rng.dirichlet(np.ones(8)).reshape(2, 4)
        j = JointDistribution(p)
        for v in polytope_vertices(j):
            assert v.residual(j) <= 1e-9
            assert np.all(v.q >= 0)
            assert v.entropy == pytest.approx(ref_entropy(v.q), abs=1e-12)


def test_g0_matches_independent_solver(rng):
    for nx, ny in [(2, 3), (2, 4), (3, 4), (2, 5)]:
        for _ in range(5):
            j = JointDistribution(rng.dirichlet(np.ones(nx * ny)).reshape(nx, ny))
            assert g0(j).value == pytest.approx(reference_g0(j.p), abs=1e-7)


def test_g0_mechanism_is_private_and_attains_value(rng):
    for _ in range(10):
        j = JointDistribution(rng.dirichlet(np.ones(6)).reshape(2, 3))
        res = g0(j)
        rep = report(j, res.mechanism)
        assert rep.leakage <= 1e-9
        assert rep.utility == pytest.approx(res.value, abs=1e-9)
        assert res.value <= conditional_entropy(j, "y|x") + 1e-9


def test_g0_is_deterministic(erasure03):
    a, b = g0(erasure03), g0(erasure03)
    assert np.array_equal(a.weights, b.weights)
    assert np.array_equal(a.mechanism.k, b.mechanism.k)


def test_zero_probability_outcome_is_ignored():
    j = JointDistribution(np.array([[0.35, 0.0, 0.15], [0.15, 0.0, 0.35]]))
    assert all(v.q[1] == 0 for v in polytope_vertices(j))
    assert g0(j).value == pytest.approx(0.0, abs=1e-9)
