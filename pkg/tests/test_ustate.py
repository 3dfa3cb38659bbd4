import math

import numpy as np
import pytest

from cocyclelab import presets
from cocyclelab.cocycle import WindowedCocycle
from cocyclelab.projective import HALF_PI, ProjMeasure, dist
from cocyclelab.symbolic import SubshiftSpec
from cocyclelab.thermo import bernoulli, markov_chain
from cocyclelab.ustate import (ConditionalFamily, atom_spectrum, backward_edges, forward_edges,
                               lyap_from_family, oseledets_dirs, push_invariance, solve_s_state,
                               solve_u_state, su_check)

FULL2 = SubshiftSpec.full_shift(2)
GOLDEN = SubshiftSpec(np.array([[1, 1], [1, 0]]), 0.5)


@pytest.mark.parametrize("make_edges", [lambda c, m: forward_edges(c, m, 2),
                                        lambda c, m: forward_edges(c, m, 1, N=3),
                                        lambda c, m: backward_edges(c, m, 2)])
def test_edge_weights_are_conditional_probabilities(make_edges):
    m = markov_chain(GOLDEN, [[0.3, 0.7], [1.0, 0.0]])
    c = presets.diagonal_windowed([0.2, -0.1], GOLDEN)
    e = make_edges(c, m)
    totals = np.bincount(e.target, weights=e.weights)
    assert np.allclose(totals, 1.0, atol=1e-14)


def test_push_preserves_mass():
    c = presets.bunched_cocycle(0.5)
    m = bernoulli(FULL2, [0.3, 0.7])
    fam = ConditionalFamily.uniform(FULL2, 2, G=32)
    out = push_invariance(fam, c, m)
    assert out.mass_error() <= 1e-13


def test_diagonal_states_are_diracs():
    c = presets.diagonal_constant(2.0, FULL2)
    m = bernoulli(FULL2, [0.5, 0.5])
    fu, _ = solve_u_state(c, m)
    fs, _ = solve_s_state(c, m)
    for meas in fu.measures:
        assert meas.masses[np.argmin(dist(meas.angles, 0.0))] == pytest.approx(1.0, abs=1e-9)
    for meas in fs.measures:
        assert meas.masses[np.argmin(dist(meas.angles, HALF_PI))] == pytest.approx(1.0, abs=1e-9)
    assert lyap_from_family(fu, c, m) == pytest.approx(math.log(2), abs=1e-9)
    assert lyap_from_family(fs, c, m) == pytest.approx(-math.log(2), abs=1e-9)


def test_atom_spectrum_constant_diagonal():
    c = presets.diagonal_constant(0.5, FULL2)
    m = bernoulli(FULL2, [0.5, 0.5])
    fu, _ = solve_u_state(c, m)
    rep = atom_spectrum(fu, c=c)
    assert rep.gamma0 == pytest.approx(1.0, abs=1e-9)
    assert rep.constant_card and rep.equivariant
    for angles in rep.V.values():
        assert len(angles) == 1 and dist(angles[0], HALF_PI) <= 1e-6


def test_atom_spectrum_flags_broken_equivariance():
    spec = SubshiftSpec.full_shift(1)
    fam = ConditionalFamily(spec, 1, [ProjMeasure(np.array([0.2, 1.0]), np.array([0.6, 0.4]))])
    c = WindowedCocycle.constant(spec, np.array([[0.0, -1.0], [1.0, 0.0]]))
    rep = atom_spectrum(fam, c=c)
    assert rep.gamma0 == pytest.approx(0.6)
    assert rep.equivariant is False


def test_rotation_is_su_state():
    c = presets.rotation_constant(0.9, FULL2)
    m = bernoulli(FULL2, [0.5, 0.5])
    fu, _ = solve_u_state(c, m, grid=64)
    rep = su_check(fu, c)
    assert rep.u_residual <= 1e-3
    assert rep.s_residual == 0.0


def test_oseledets_directions_constant():
    c = presets.diagonal_constant(2.0, FULL2)
    from cocyclelab.symbolic import PointRep
    res = oseledets_dirs(c, PointRep.periodic(FULL2, (0, 1)), n=40)
    assert dist(res.E_u, 0.0) <= 1e-9
    assert dist(res.E_s, HALF_PI) <= 1e-9
