import math

import numpy as np
import pytest

from cocyclelab import presets
from cocyclelab.cocycle import WindowedCocycle, log_det_integral
from cocyclelab.exponents import (Estimate, agreement, kingman, orbit_products, periodic_route,
                                  ustate_route)
from cocyclelab.symbolic import SubshiftSpec
from cocyclelab.thermo import bernoulli, markov_chain

FULL2 = SubshiftSpec.full_shift(2)
GOLDEN = SubshiftSpec(np.array([[1, 1], [1, 0]]), 0.5)


def test_orbit_products_match_direct_product():
    c = presets.bunched_cocycle(0.8)
    rng = np.random.default_rng(0)
    paths = rng.integers(0, 2, size=(5, 30))
    top, logdet = orbit_products(c, paths, 30)
    for row, t, d in zip(paths, top, logdet):
        P = np.eye(2)
        for a in row:
            P = c.values[a] @ P
        assert t == pytest.approx(math.log(np.linalg.norm(P, 2)), abs=1e-12)
        assert d == pytest.approx(math.log(abs(np.linalg.det(P))), abs=1e-12)


def test_kingman_deterministic_for_constant_diagonal():
    c = presets.diagonal_constant(3.0, FULL2)
    est = kingman(c, bernoulli(FULL2, [0.5, 0.5]), n=500, samples=10, seed=0)
    assert est.lam_plus == pytest.approx(math.log(3), abs=1e-12)
    assert est.se_plus == pytest.approx(0.0, abs=1e-12)


def test_periodic_route_by_period():
    c = presets.diagonal_windowed([0.5, -0.3], FULL2)
    m = bernoulli(FULL2, [0.5, 0.5])
    est = periodic_route(c, m, max_period=4)
    assert [p for p, _, _ in est.info["by_period"]] == [1, 2, 3, 4]
    # each period-p average of |mean a| is at least |E a| (Jensen)
    for _, lp, lm in est.info["by_period"]:
        assert lp >= 0.1 - 1e-12 and lp == pytest.approx(-lm)


def test_three_routes_agree_windowed():
    c = WindowedCocycle(GOLDEN, (0, 2), np.array([[[1.5, 0.2], [0.1, 0.8]], [[1.2, -0.3], [0.2, 0.9]],
                                                  [[0.9, 0.1], [0.3, 1.4]]]))
    m = markov_chain(GOLDEN, [[0.6, 0.4], [1.0, 0.0]])
    ests = [kingman(c, m, n=4000, samples=64, seed=3), periodic_route(c, m, 6), ustate_route(c, m)]
    rows = agreement(ests, z=3.0)
    assert all(r["agree"] for r in rows)
    u = ests[2]
    assert u.lam_plus + u.lam_minus == pytest.approx(log_det_integral(c, m), abs=1e-6)


def test_agreement_row_layout():
    a = Estimate("a", 1.0, -1.0, 0.1, 0.1, 0.0, 0.01)
    b = Estimate("b", 1.5, -1.0, 0.1, 0.1, 0.5, 0.01)
    rows = agreement([a, b], z=3.0)
    by = {(r["pair"], r["quantity"]): r for r in rows}
    assert by[("a-b", "lam_plus")]["agree"] is False
    assert by[("a-b", "lam_minus")]["agree"] is True
    assert by[("b-det", "sum_rule")]["agree"] is False
    assert by[("a-det", "sum_rule")]["agree"] is True
