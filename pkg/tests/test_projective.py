import math

import numpy as np
import pytest

from cocyclelab import presets
from cocyclelab.projective import (HALF_PI, Q_ANGLE, InfeasibleError, ProjMeasure, act,
                                   deriv_norm, dist, kolmogorov, log_gain, margulis_phi,
                                   margulis_setup, solve_rho)
from cocyclelab.symbolic import SubshiftSpec
from cocyclelab.thermo import bernoulli
from cocyclelab.ustate import ConditionalFamily

FULL2 = SubshiftSpec.full_shift(2)
A = np.array([[1.5, 0.4], [-0.3, 0.8]])


def test_act_examples():
    assert act(np.diag([2.0, 1.0]), 0.0) == 0.0
    assert act(np.diag([2.0, 1.0]), HALF_PI) == pytest.approx(HALF_PI)
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    assert act(rot, 0.3) == pytest.approx(0.3 + HALF_PI)
    # result stays in [0, pi)
    out = act(A, np.linspace(0, math.pi, 50, endpoint=False))
    assert np.all((out >= 0) & (out < math.pi))


def test_act_composition():
    B = np.array([[0.2, 1.1], [0.9, -0.4]])
    v = np.linspace(0.01, 3.1, 40)
    assert np.abs(dist(act(B, act(A, v)), act(B @ A, v))).max() <= 1e-12


def test_dist_examples():
    assert dist(0.0, HALF_PI) == pytest.approx(1.0)
    assert dist(0.1, math.pi - 0.1) == pytest.approx(0.2 / HALF_PI)
    assert dist(1.0, 1.0) == 0.0


def test_log_gain_is_log_norm():
    v = 0.7
    vec = np.array([math.cos(v), math.sin(v)])
    assert log_gain(A, v) == pytest.approx(math.log(np.linalg.norm(A @ vec)))


def test_deriv_norm_matches_finite_difference():
    v = np.linspace(0.05, 3.0, 30)
    h = 1e-6
    fd = (act(A, v + h) - act(A, v - h)) / (2 * h)
    # unwrap jumps across pi
    fd = np.where(np.abs(fd) > 1e3, np.nan, fd)
    ok = ~np.isnan(fd)
    assert np.allclose(np.abs(fd[ok]), deriv_norm(A, v)[ok], rtol=1e-6)


def test_margulis_phi_values():
    assert margulis_phi(0.0, HALF_PI) == pytest.approx(0.0)
    assert margulis_phi(0.0, 0.1 * HALF_PI) == pytest.approx(-math.log(0.1))
    assert margulis_phi(0.3, 0.3) == math.inf


def test_margulis_setup_closed_form():
    c, m = presets.margulis_preset()
    p = margulis_setup(c, m)
    assert p.N == 5
    for v in p.kappa.values():
        assert v == pytest.approx(2.5 * math.log(4), abs=1e-12)
    r0, r1, r2, r3, r4 = p.radii
    assert r0 > r1 > r2 > r3 > r4 > 0
    assert 100 * p.delta * p.M1 * p.M2 < p.alpha
    assert p.checks["phi_contraction_slack"] <= 1e-9


def test_margulis_setup_identity_infeasible():
    c = presets.diagonal_constant(1.0, FULL2)
    with pytest.raises(InfeasibleError):
        margulis_setup(c, bernoulli(FULL2, [0.5, 0.5]))


def test_margulis_setup_rejects_non_diagonal():
    c = presets.rotation_constant(0.4, FULL2)
    with pytest.raises(InfeasibleError):
        margulis_setup(c, bernoulli(FULL2, [0.5, 0.5]))


def test_solve_rho_example():
    meas = ProjMeasure(np.array([0.1, -0.2, 0.5]) * HALF_PI, np.array([0.3, 0.2, 0.5]))
    fam = ConditionalFamily(SubshiftSpec.full_shift(1), 1, [meas])
    rho = solve_rho(fam, 0.5)
    assert rho[(0,)] == pytest.approx(0.2)
    assert meas.ball_mass(Q_ANGLE, rho[(0,)], closed=True) == pytest.approx(0.5)
    with pytest.raises(InfeasibleError):
        solve_rho(fam, 0.4)


def test_projmeasure_ball_and_push():
    meas = ProjMeasure.uniform_grid(8)
    assert meas.total_mass == pytest.approx(1.0)
    pushed = meas.push(np.diag([3.0, 1.0]))
    assert pushed.total_mass == pytest.approx(1.0)
    assert kolmogorov(meas, meas) == 0.0
    assert kolmogorov(meas, pushed) > 0.0
