import math

import numpy as np
import pytest

from cocyclelab.coupling import (Coupling, CouplingFamily, DiagonalAtomError, confine,
                                 decrement_step, defect_split, demo_instance, energy,
                                 marginal_error, max_ball_mass, min_pair_distance, spread_ball,
                                 spread_diagonal, transfer_pushforward, trivial_coupling)
from cocyclelab.projective import HALF_PI, InfeasibleError, ProjMeasure
from cocyclelab.symbolic import SubshiftSpec

ONE = SubshiftSpec.full_shift(1)


def single(meas, xi=None):
    xi = trivial_coupling(meas) if xi is None else xi
    return CouplingFamily(ONE, 1, [xi], [meas], [meas], np.array([1.0]))


def test_energy_examples():
    xi = Coupling([0.0], [HALF_PI / 2], [1.0])
    assert xi.energy() == pytest.approx(math.log(2))
    xi = Coupling([0.0, 0.0], [HALF_PI, 0.1 * HALF_PI], [0.5, 0.5])
    assert xi.energy() == pytest.approx(0.5 * math.log(10))
    with pytest.raises(DiagonalAtomError):
        Coupling([0.3], [0.3], [0.1]).energy()


def test_trivial_coupling_marginals_and_symmetry():
    meas = ProjMeasure(np.array([0.1, 0.7, 2.0]), np.array([0.2, 0.3, 0.1]))
    xi = trivial_coupling(meas)
    assert xi.mass == pytest.approx(meas.total_mass)
    assert marginal_error(xi, meas) <= 1e-15
    assert xi.symmetry_error() == 0.0


def test_max_ball_mass():
    meas = ProjMeasure(np.array([0.0, 0.05, 0.5, 1.9]) * HALF_PI, np.full(4, 0.25))
    assert max_ball_mass(meas, 0.03) == pytest.approx(0.5)
    # wraps around the circle: 1.9 and 0.0 are 0.1 apart
    assert max_ball_mass(meas, 0.08) == pytest.approx(0.75)


def test_spread_ball_bookkeeping():
    meas = ProjMeasure.uniform_grid(16)
    xi = trivial_coupling(meas)
    center = meas.angles[3]
    r = 0.1
    out, S, theta = spread_ball(xi, center, r)
    near = (np.abs(meas.angles - center) < r * HALF_PI)
    assert S == pytest.approx(near.sum() ** 2 / 256)
    assert marginal_error(out, meas) <= 1e-14
    inB = lambda a: np.abs(((a - center + HALF_PI) % math.pi) - HALF_PI) < r * HALF_PI
    assert out.w[inB(out.u) & inB(out.v)].sum() == 0.0
    assert 0 < theta < 1


def test_spread_needs_far_mass():
    meas = ProjMeasure(np.array([0.0, 0.01]), np.array([0.5, 0.5]))
    with pytest.raises(InfeasibleError):
        spread_ball(trivial_coupling(meas), 0.0, 0.1)


def test_spread_diagonal_sixty_four_atoms():
    meas = ProjMeasure.uniform_grid(64)
    out = spread_diagonal(single(meas), 0.125)
    xi = out.couplings[0]
    assert out.marginal_error() <= 1e-12
    assert out.symmetry_error() <= 1e-15
    assert min_pair_distance(xi) >= 0.125 - 1e-12
    assert xi.energy() <= -math.log(1 / 16)
    assert out.info["lebesgue"] == 0.0625


@pytest.fixture(scope="module")
def inst():
    return demo_instance(3)


def test_confine_keeps_marginals(inst):
    fam, deltas = confine(inst.family, inst.params)
    assert fam.marginal_error() <= 1e-12
    assert np.all(deltas <= 4 * inst.params.delta * inst.params.M2 + 1e-9)


def test_pushforward_identity_and_weights(inst):
    fam = inst.family
    raw = transfer_pushforward(fam, inst.cocycle, inst.measure, 0)
    assert all(a is b for a, b in zip(raw.couplings, fam.couplings))
    raw = transfer_pushforward(fam, inst.cocycle, inst.measure, inst.params.N)
    for full in raw.pushed_full:
        assert full.total_mass == pytest.approx(1.0, abs=1e-12)
    # stationarity: the mu-average of the coupling masses is unchanged
    mu = inst.measure.cylinder_weights(fam.depth)
    before = sum(w * x.mass for w, x in zip(mu, fam.couplings))
    after = sum(w * x.mass for w, x in zip(mu, raw.couplings))
    assert after == pytest.approx(before, abs=1e-13)


def test_defect_split_identity(inst):
    fam, _ = confine(inst.family, inst.params)
    raw = transfer_pushforward(fam, inst.cocycle, inst.measure, inst.params.N)
    # the unchanged targets and radii are used for the split of an invariant family
    defects = defect_split(raw, raw.pushed_full, fam.rho, inst.params, check=False)
    for d in defects:
        assert d.residual <= 1e-10


def test_decrement_step_drops_by_alpha(inst):
    e0 = energy(inst.family, inst.measure)
    new, rep = decrement_step(inst.family, inst.cocycle, inst.measure, inst.params)
    assert rep.energy_before == pytest.approx(e0)
    assert rep.drop >= inst.params.alpha
    assert all(r["ok"] for r in rep.ledger)
    assert new.marginal_error() <= 1e-10
    assert new.symmetry_error() <= 1e-12
