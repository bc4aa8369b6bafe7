import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pdsplit import (Dense, ElasticNet, Identity, L1, ProblemInstance, SaddlePoint,
                     ShiftedL1, SquaredL2, Zero, ZeroFunction, kkt_residual)
from pdsplit.problem import (augmented_lagrangian_value, constraint_residual, lagrangian_value,
                             objective_value)

from conftest import l1l1_case


def oracle_lagrangian(fval, gval, A, B, b, x, y, lam):
    r = [sum(A[i][j] * x[j] for j in range(len(x))) + sum(B[i][j] * y[j] for j in range(len(y))) - b[i]
         for i in range(len(b))]
    return fval + gval + sum(l * ri for l, ri in zip(lam, r)), sum(ri * ri for ri in r)


def interval_distance(v, x, w):
    """Distance from v to the subdifferential of w|.| at x, one coordinate."""
    if x == 0:
        return max(abs(v) - w, 0.0)
    return abs(v - w * (1.0 if x > 0 else -1.0))


def test_dimension_checks():
    with pytest.raises(ValueError):
        ProblemInstance(L1(2, 1.0), L1(3, 1.0), Identity(2), Identity(2), np.zeros(2))
    with pytest.raises(ValueError):
        ProblemInstance(L1(2, 1.0), L1(2, 1.0), Identity(2), Identity(2), np.zeros(3))


def test_nonseparable_encoding():
    p = ProblemInstance.nonseparable(L1(2, 1.0), Identity(2), np.ones(2))
    assert p.n_y == 0 and not p.is_separable
    assert lagrangian_value(p, np.ones(2), np.zeros(0), np.ones(2)) == 2.0


def test_lagrangian_vanishing_term_on_feasible_point(rng):
    _, p = l1l1_case(1)
    y = rng.standard_normal(3)
    x = p.b - p.B.apply(y)
    lam = rng.standard_normal(3)
    assert lagrangian_value(p, x, y, lam) == pytest.approx(objective_value(p, x, y), abs=1e-12)


@pytest.mark.oracle
def test_lagrangian_case1_origin():
    _, p = l1l1_case(1)
    # |0 - 2*1|_1 = 6, and the multiplier term vanishes with lambda = 0
    assert lagrangian_value(p, np.zeros(3), np.zeros(3), np.zeros(3)) == 6.0


@pytest.mark.oracle
def test_lagrangian_random_against_straight_line(rng):
    A = rng.standard_normal((3, 4))
    B = rng.standard_normal((3, 2))
    p = ProblemInstance(ElasticNet(4, 0.3, 0.7), SquaredL2(2, 1.1), Dense(A), Dense(B),
                        rng.standard_normal(3))
    x, y, lam = rng.standard_normal(4), rng.standard_normal(2), rng.standard_normal(3)
    fval = 0.3 * sum(abs(t) for t in x) + 0.35 * sum(t * t for t in x)
    gval = 0.55 * sum(t * t for t in y)
    oracle, sq = oracle_lagrangian(fval, gval, A.tolist(), B.tolist(), p.b.tolist(), x, y, lam)
    assert lagrangian_value(p, x, y, lam) == pytest.approx(oracle, rel=1e-12)
    assert augmented_lagrangian_value(p, x, y, lam, 1.7) == pytest.approx(oracle + 0.85 * sq, rel=1e-12)


@pytest.mark.oracle
def test_augmented_lagrangian_hand_value():
    _, p = l1l1_case(1)
    x = np.array([1.0, 0.0, 0.0])
    # |x - 2|_1 = 1 + 2 + 2 and theta/2 |x|^2 = 1
    assert augmented_lagrangian_value(p, x, np.zeros(3), np.zeros(3), 2.0) == pytest.approx(6.0, abs=1e-15)
    oracle, sq = oracle_lagrangian(5.0, 0.0, np.eye(3).tolist(), (-np.diag([2.0, 3.0, 1.0])).tolist(),
                                   [0.0] * 3, x, [0.0] * 3, [0.0] * 3)
    assert oracle + 1.0 * sq == 6.0


def test_augmented_lagrangian_theta_zero_and_negative(rng):
    _, p = l1l1_case(2)
    x, y, lam = rng.standard_normal(3), rng.standard_normal(3), rng.standard_normal(3)
    assert augmented_lagrangian_value(p, x, y, lam, 0.0) == lagrangian_value(p, x, y, lam)
    with pytest.raises(ValueError):
        augmented_lagrangian_value(p, x, y, lam, -1.0)


@pytest.mark.oracle
def test_kkt_case1_certificate():
    _, p = l1l1_case(1)
    s = SaddlePoint(np.zeros(3), np.zeros(3), np.ones(3), 6.0)
    # interval oracle: -A^T lam = -1 in d|x - 2|_1 at 0, i.e. the point -1 (x - 2 < 0)
    # -B^T lam = M lam = (2,3,1) in [-3,3]^3
    M = [2.0, 3.0, 1.0]
    dx = [interval_distance(-1.0, 0.0 - 2.0, 1.0) for _ in range(3)]
    dy = [interval_distance(M[i] * 1.0, 0.0, 3.0) for i in range(3)]
    assert max(dx + dy) == 0.0
    assert kkt_residual(p, s) == 0.0


@pytest.mark.oracle
def test_kkt_perturbed_multiplier():
    _, p = l1l1_case(1)
    lam = np.array([1.5, 1.0, 1.0])
    s = SaddlePoint(np.zeros(3), np.zeros(3), lam, 6.0)
    M = [2.0, 3.0, 1.0]
    dx = np.hypot.reduce([interval_distance(-lam[i], -2.0, 1.0) for i in range(3)])
    dy = np.hypot.reduce([interval_distance(M[i] * lam[i], 0.0, 3.0) for i in range(3)])
    oracle = max(dx, dy)
    assert oracle == pytest.approx(0.5)
    assert kkt_residual(p, s) == pytest.approx(oracle, abs=1e-15)


def test_kkt_catches_stationarity_margin():
    p = ProblemInstance(SquaredL2(1, 1.0), ZeroFunction(1), Identity(1), Zero(1, 1), np.ones(1))
    # feasible, but stationarity needs lambda = -1
    s = SaddlePoint(np.ones(1), np.zeros(1), np.array([-0.7]), 0.5)
    assert kkt_residual(p, s) >= 0.3 - 1e-15


def test_json_roundtrip(rng):
    p = ProblemInstance(ShiftedL1(2, 1.0, [1.0, 2.0]), ElasticNet(3, 0.2, 0.1), Identity(2),
                        Dense(rng.standard_normal((2, 3))), np.zeros(2))
    q = ProblemInstance.from_json(p.to_json())
    x, y, lam = rng.standard_normal(2), rng.standard_normal(3), rng.standard_normal(2)
    assert lagrangian_value(q, x, y, lam) == lagrangian_value(p, x, y, lam)


def test_saddle_roundtrip():
    s = SaddlePoint(np.ones(2), np.zeros(1), np.ones(2), 3.0, kkt=1e-9, converged=False)
    t = SaddlePoint.from_dict(s.to_dict())
    assert t.phi_star == 3.0 and not t.converged and np.array_equal(t.x_star, s.x_star)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 100))
def test_augmented_minus_plain_is_penalty(seed, theta):
    r = np.random.default_rng(seed)
    p = ProblemInstance(L1(3, 1.0), SquaredL2(2, 0.5), Dense(r.standard_normal((2, 3))),
                        Dense(r.standard_normal((2, 2))), r.standard_normal(2))
    x, y, lam = r.standard_normal(3), r.standard_normal(2), r.standard_normal(2)
    res = constraint_residual(p, x, y)
    diff = augmented_lagrangian_value(p, x, y, lam, theta) - lagrangian_value(p, x, y, lam)
    assert diff == pytest.approx(0.5 * theta * float(np.dot(res, res)), rel=1e-12, abs=1e-12)
