import itertools
import math

import numpy as np
import pytest

from cocyclelab import presets
from cocyclelab.cocycle import (CallbackCocycle, CocycleError, HolonomyError, WindowedCocycle,
                                default_anchors, fiber_bunching, holder_norm, holonomy,
                                iterate, log_det_integral, rotation, sl2_split, straighten,
                                straightened_value)
from cocyclelab.symbolic import PointRep, SubshiftSpec, random_point, shift, with_random_past
from cocyclelab.thermo import bernoulli

FULL2 = SubshiftSpec.full_shift(2, 0.5)


def two_sided(scale=0.05):
    gen = np.array([[[1.0, 0.4], [0.2, -0.6]], [[-0.4, 0.8], [0.6, 0.2]]])
    return WindowedCocycle.from_function(
        FULL2, (-1, 1), lambda w: presets.expm2(scale * (gen[w[1]] + 0.5 * gen[w[0]].T)))


def test_iterate_constant_is_power():
    A = np.array([[2.0, 1.0], [1.0, 1.0]])
    c = WindowedCocycle.constant(FULL2, A)
    x = PointRep.periodic(FULL2, (0, 1))
    assert np.allclose(iterate(c, x, 4), np.linalg.matrix_power(A, 4))
    assert np.allclose(iterate(c, x, -3), np.linalg.matrix_power(np.linalg.inv(A), 3))
    assert np.array_equal(iterate(c, x, 0), np.eye(2))


def test_cocycle_law():
    c = two_sided(0.3)
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = random_point(FULL2, rng, 6)
        m, n = rng.integers(-4, 5, size=2)
        lhs = iterate(c, x, m + n)
        rhs = iterate(c, shift(x, m), n) @ iterate(c, x, m)
        assert np.allclose(lhs, rhs, atol=1e-12)


def test_singular_matrix_rejected():
    with pytest.raises(CocycleError):
        WindowedCocycle.constant(FULL2, [[1.0, 2.0], [2.0, 4.0]])


def test_holder_norm_brute_force():
    c = two_sided(0.4)
    alpha = 0.7
    sup = max(np.linalg.norm(M, 2) for M in c.values)
    semi = 0.0
    words = [tuple(w) for w in c.words.tolist()]
    for (i, a), (j, b) in itertools.combinations(enumerate(words), 2):
        # the closest points reading a and b at coordinates -1, 0 agree on |n| < N
        N = min(abs(k) for k, (p, q) in zip(range(c.lo, c.hi), zip(a, b)) if p != q)
        gap = np.linalg.norm(c.values[i] - c.values[j], 2)
        semi = max(semi, gap / (FULL2.theta ** N) ** alpha)
    h = holder_norm(c, alpha)
    assert abs(h.sup_norm - sup) <= 1e-12
    assert abs(h.seminorm - semi) <= 1e-12


def test_bunching_near_identity_and_monotone():
    c = two_sided(0.05)
    cert = fiber_bunching(c, 1.0)
    assert cert is not None and cert.N == 1 and cert.exact
    # a larger Hoelder exponent can only help: certified set is upward closed, ratio decreases
    c = presets.diagonal_rotation_cocycle(1.0, sigma=1.2)
    certs = [fiber_bunching(c, a, N_max=20) for a in (0.4, 0.6, 0.8, 1.0)]
    flags = [x is not None for x in certs]
    assert flags == sorted(flags) and flags[-1] and not flags[0]
    ratios = [x.worst_ratio for x in certs if x is not None]
    assert ratios == sorted(ratios, reverse=True)


def test_bunching_threshold_for_diagonal():
    # diag(s, 1/s): ratio s^2 theta^(N alpha) per step is N-independent in sign
    assert fiber_bunching(presets.diagonal_constant(1.4, FULL2), 1.0) is not None
    assert fiber_bunching(presets.diagonal_constant(1.5, FULL2), 1.0, N_max=16) is None


def test_sl2_split_negative_determinant():
    c = WindowedCocycle.constant(FULL2, np.diag([2.0, -2.0]))
    g, b = sl2_split(c)
    assert g[(0,)] == pytest.approx(-2.0)
    assert np.allclose(b.values[0], np.diag([-1.0, 1.0]))
    assert np.linalg.det(b.values[0]) == pytest.approx(-1.0)


def test_holonomy_constant_is_identity():
    c = WindowedCocycle.constant(FULL2, rotation(0.3))
    rng = np.random.default_rng(1)
    x = random_point(FULL2, rng, 4)
    y = with_random_past(x, rng, 4)
    assert np.allclose(holonomy(c, x, y, "s").matrix, np.eye(2))


def test_holonomy_matches_limit_formula():
    c = two_sided(0.2)
    cb = CallbackCocycle(FULL2, c, bunching_ratio=fiber_bunching(c, 1.0).worst_ratio)
    rng = np.random.default_rng(2)
    for _ in range(10):
        x = random_point(FULL2, rng, 5)
        y = with_random_past(x, rng, 5)
        exact = holonomy(c, x, y, "s")
        limit = holonomy(cb, x, y, "s")
        assert exact.exact and not limit.exact
        assert np.allclose(exact.matrix, limit.matrix, atol=1e-10)


def test_holonomy_rejects_unrelated_points():
    c = two_sided()
    x = PointRep.periodic(FULL2, (0,))
    y = PointRep.periodic(FULL2, (1,))
    with pytest.raises(HolonomyError):
        holonomy(c, x, y, "s")


def test_straighten_window_and_values():
    c = two_sided(0.3)
    b = straighten(c)
    assert b.window == (0, 2) and b.future_only
    anchors = default_anchors(FULL2)
    rng = np.random.default_rng(3)
    for _ in range(100):
        x = random_point(FULL2, rng, 5)
        assert np.abs(b(x) - straightened_value(c, x, anchors)).max() <= 1e-12


def test_straighten_keeps_determinant_integral():
    c = two_sided(0.3)
    m = bernoulli(FULL2, [0.3, 0.7])
    assert log_det_integral(straighten(c), m) == pytest.approx(log_det_integral(c, m), abs=1e-12)


def test_straighten_future_only_is_identity():
    c = presets.bunched_cocycle(0.4)
    assert straighten(c) is c


def test_log_det_integral_closed_form():
    c = presets.diagonal_windowed([0.3, -0.2], FULL2)
    m = bernoulli(FULL2, [0.25, 0.75])
    assert log_det_integral(c, m) == pytest.approx(0.0, abs=1e-15)
    c = WindowedCocycle(FULL2, (0, 1), np.array([np.eye(2) * 2, np.eye(2) * 3]))
    assert log_det_integral(c, m) == pytest.approx(0.25 * math.log(4) + 0.75 * math.log(9))
