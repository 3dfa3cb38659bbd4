"""Property-based checks of the algebraic identities the numerics rely on."""
import math

import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from cocyclelab.coupling import marginal_error, spread_diagonal, trivial_coupling
from cocyclelab.projective import HALF_PI, ProjMeasure, act, deriv_norm, dist
from cocyclelab.symbolic import PointRep, SubshiftSpec, d_theta

FULL2 = SubshiftSpec.full_shift(2, 0.5)

entry = st.floats(-3, 3, allow_nan=False)
angle = st.floats(0, math.pi, allow_nan=False, exclude_max=True)


@st.composite
def matrices(draw):
    M = np.array([[draw(entry), draw(entry)], [draw(entry), draw(entry)]])
    if abs(np.linalg.det(M)) < 0.1:
        M = M + np.eye(2) * 2.0
    # the shift can itself land on a singular matrix
    assume(abs(np.linalg.det(M)) >= 0.1)
    return M


words = st.lists(st.integers(0, 1), min_size=1, max_size=5)


@st.composite
def points(draw):
    return PointRep(FULL2, tuple(draw(words)), tuple(draw(st.lists(st.integers(0, 1), max_size=6))),
                    tuple(draw(words)), draw(st.integers(0, 3)))


@given(points(), points(), points())
@settings(max_examples=150, deadline=None)
def test_metric_is_ultrametric(x, y, z):
    assert d_theta(x, z) <= max(d_theta(x, y), d_theta(y, z))
    assert d_theta(x, y) == d_theta(y, x)
    assert (d_theta(x, y) == 0) == (x == y)


@given(matrices(), matrices(), angle)
@settings(max_examples=200, deadline=None)
def test_action_composes(A, B, v):
    assert dist(act(B, act(A, v)), act(B @ A, v)) <= 1e-9


@given(matrices(), matrices(), angle)
@settings(max_examples=200, deadline=None)
def test_derivative_chain_rule(A, B, v):
    lhs = deriv_norm(B @ A, v)
    rhs = deriv_norm(B, act(A, v)) * deriv_norm(A, v)
    assert math.isclose(lhs, rhs, rel_tol=1e-8)


@given(matrices(), angle, angle)
@settings(max_examples=200, deadline=None)
def test_distance_symmetric_and_bounded(A, u, v):
    assert dist(u, v) == dist(v, u)
    assert 0 <= dist(act(A, u), act(A, v)) <= 1


@given(st.lists(st.floats(0.05, 1.0), min_size=12, max_size=30), st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_spreading_keeps_symmetry_and_marginals(masses, seed):
    rng = np.random.default_rng(seed)
    n = len(masses)
    angles = np.sort(rng.choice(4096, size=n, replace=False)) * math.pi / 4096
    w = np.asarray(masses)
    meas = ProjMeasure(angles, w / w.sum())
    from cocyclelab.coupling import CouplingFamily, max_ball_mass
    r = 1.0 / 32
    # the far square must outweigh any small square for spreading to apply
    if max_ball_mass(meas, 2 * r) > 0.3:
        return
    fam = CouplingFamily(SubshiftSpec.full_shift(1), 1, [trivial_coupling(meas)], [meas], [meas],
                         np.array([1.0]))
    out = spread_diagonal(fam, r)
    xi = out.couplings[0]
    assert marginal_error(xi, meas) <= 1e-12
    assert xi.symmetry_error() <= 1e-15
    assert dist(xi.u, xi.v).min() >= r * (1 - 1e-12)
