import itertools
import math

import numpy as np
import pytest

from cocyclelab.symbolic import SubshiftSpec, admissible_words, recode
from cocyclelab.thermo import (NotPrimitiveError, Potential, bernoulli, equilibrium,
                               gibbs_ratio_residual, markov_chain, markov_potential,
                               measure_distance, rpf_residuals, rpf_solve, sample_paths,
                               stabilize_potential, stabilize_residual, transfer_apply)

GOLDEN = SubshiftSpec(np.array([[1, 1], [1, 0]]), 0.5)
FULL2 = SubshiftSpec.full_shift(2)


def test_transfer_apply_sums_over_predecessors():
    phi = Potential(GOLDEN, (0, 1), np.array([0.3, -0.2]))
    g = np.array([2.0, 5.0])
    # predecessors of 0 are 0 and 1, of 1 only 0
    assert transfer_apply(phi, g, 0) == pytest.approx(math.exp(0.3) * 2 + math.exp(-0.2) * 5)
    assert transfer_apply(phi, g, 1) == pytest.approx(math.exp(0.3) * 2)


def test_rpf_against_dense_eigensolve():
    vals = np.array([0.1, -0.5, 0.7, 0.2, -0.3, 0.4, 0.0, 0.9])
    phi = Potential(FULL2, (0, 3), vals)
    log_lam, zeta, nu = rpf_solve(phi)
    rec = recode(FULL2, 3)
    M = np.exp(vals)[:, None] * rec.coded.Q
    ev = np.linalg.eigvals(M)
    assert log_lam == pytest.approx(math.log(np.max(np.real(ev))), abs=1e-12)
    assert np.dot(zeta, nu) == pytest.approx(1.0, abs=1e-14)
    assert max(rpf_residuals(equilibrium(phi))) <= 1e-12


def test_not_primitive_raises():
    spec = SubshiftSpec(np.array([[0, 1], [1, 0]]))
    with pytest.raises(NotPrimitiveError):
        equilibrium(Potential.constant(spec, 0.0))


def test_bernoulli_half_jacobian_is_two():
    m = bernoulli(FULL2, [0.5, 0.5])
    ju, js = m.jacobians()
    assert np.allclose(ju, 2.0) and np.allclose(js, 2.0)


def test_markov_potential_reproduces_chain():
    p = np.array([[0.6, 0.4], [1.0, 0.0]])
    m = equilibrium(markov_potential(GOLDEN, p))
    chain = markov_chain(GOLDEN, p)
    for L in range(1, 7):
        assert np.abs(m.cylinder_weights(L) - chain.cylinder_weights(L)).max() <= 1e-12


def test_gibbs_property():
    phi = Potential(GOLDEN, (0, 2), np.array([0.2, -0.7, 0.5]))
    assert gibbs_ratio_residual(equilibrium(phi)) <= 1e-10


def test_cylinder_weights_consistent():
    m = equilibrium(Potential(FULL2, (0, 2), np.array([0.1, 0.4, -0.2, 0.3])))
    for L in range(1, 6):
        w = m.cylinder_weights(L)
        assert w.sum() == pytest.approx(1.0, abs=1e-13)
        # Kolmogorov consistency: summing the last symbol gives the shorter cylinder
        longer = m.cylinder_weights(L + 1)
        words = admissible_words(FULL2, L + 1)
        short = {tuple(r): 0.0 for r in admissible_words(FULL2, L).tolist()}
        for row, x in zip(words.tolist(), longer):
            short[tuple(row[:-1])] += x
        assert np.allclose(list(short.values()), w, atol=1e-14)


def test_stabilized_potential_is_cohomologous():
    phi = Potential(FULL2, (-2, 1), np.linspace(-1, 1, 8))
    phi_u, psi = stabilize_potential(phi)
    assert phi_u.future_only
    assert stabilize_residual(phi, phi_u, psi, samples=100) <= 1e-12
    # same pressure
    assert rpf_solve(phi_u)[0] == pytest.approx(equilibrium(phi).log_lambda, abs=1e-12)


def test_measure_distance_bernoulli():
    m1, m2 = bernoulli(FULL2, [0.5, 0.5]), bernoulli(FULL2, [0.6, 0.4])
    ws, gap = measure_distance(m1, m2, depth=1)
    assert ws == pytest.approx(0.1)
    # psi = 1 / mu[x_0] for Bernoulli measures
    assert gap == pytest.approx(max(abs(2 - 1 / 0.6), abs(2 - 1 / 0.4)), abs=1e-12)
    oracle = 0.0
    for L in range(1, 5):
        for w in itertools.product((0, 1), repeat=L):
            k = sum(w)
            oracle = max(oracle, abs(0.5 ** L - 0.4 ** k * 0.6 ** (L - k)))
    assert measure_distance(m1, m2, depth=4)[0] == pytest.approx(oracle, abs=1e-15)


def test_sampler_frequencies():
    p = np.array([[0.3, 0.7], [1.0, 0.0]])
    m = markov_chain(GOLDEN, p)
    paths = sample_paths(m, 2, 200_000, np.random.default_rng(0))
    assert np.all(GOLDEN.Q[paths[:, 0], paths[:, 1]] == 1)
    freq = np.mean(paths[:, 0] == 0)
    assert freq == pytest.approx(m.pi[0], abs=5e-3)
    pair = np.mean((paths[:, 0] == 0) & (paths[:, 1] == 1))
    assert pair == pytest.approx(m.pi[0] * 0.7, abs=5e-3)


def test_markov_chain_rejects_forbidden_edge():
    from cocyclelab.symbolic import SpecError
    with pytest.raises(SpecError):
        markov_chain(GOLDEN, [[0.5, 0.5], [0.5, 0.5]])
