"""Stock cocycle and potential families.

The two parametrised families are illustrative constructions for exercising the
tools. They are generated examples, not data taken from any source.
"""
from __future__ import annotations

import math

import numpy as np

from .cocycle import WindowedCocycle, rotation
from .symbolic import SubshiftSpec
from .thermo import Potential, bernoulli


def expm2(S):
    """exp of a real 2x2 matrix (closed form via the traceless part)."""
    S = np.asarray(S, dtype=float)
    tr = 0.5 * (S[0, 0] + S[1, 1])
    T = S - tr * np.eye(2)
    q = -(T[0, 0] * T[1, 1] - T[0, 1] * T[1, 0])   # T^2 = q I
    if q > 1e-300:
        r = math.sqrt(q)
        E = math.cosh(r) * np.eye(2) + (math.sinh(r) / r) * T
    elif q < -1e-300:
        r = math.sqrt(-q)
        E = math.cos(r) * np.eye(2) + (math.sin(r) / r) * T
    else:
        E = np.eye(2) + T
    return math.exp(tr) * E


# generators used by the near-identity family, one per symbol of the full 2-shift
BUNCHED_GENERATORS = (np.array([[0.0, 0.08], [0.08, 0.0]]),
                      np.array([[0.06, -0.05], [-0.05, -0.06]]))
BUNCHED_TILT = 0.25
BUNCHED_ROTATIONS = (0.3, -0.7)
BUNCHED_PHI0 = (0.0, 1.0)


def full_shift(n=2, theta=0.5):
    return SubshiftSpec.full_shift(n, theta)


def bunched_cocycle(t, spec=None, rotate=True):
    """A_t(i) = exp(t S_i) diag(e^c, e^-c) R(beta_i) on the full 2-shift, window [0, 1).

    For |t| <= 1 the condition number of every matrix stays below 2, so the family
    is fiber-bunched at N = 1 for theta = 1/2 and Hoelder exponent 1.
    """
    spec = spec or full_shift(2)
    D = np.diag([math.exp(BUNCHED_TILT), math.exp(-BUNCHED_TILT)])
    mats = []
    for i in range(spec.alphabet_size):
        S = BUNCHED_GENERATORS[i % len(BUNCHED_GENERATORS)]
        M = expm2(t * S) @ D
        if rotate:
            M = M @ rotation(BUNCHED_ROTATIONS[i % len(BUNCHED_ROTATIONS)])
        mats.append(M)
    return WindowedCocycle(spec, (0, 1), np.array(mats))


def bunched_potential(t, spec=None, phi0=BUNCHED_PHI0):
    """phi_t = t * phi0 with phi0 a function of x_0 only."""
    spec = spec or full_shift(2)
    return Potential(spec, (0, 1), t * np.asarray(phi0[:spec.alphabet_size], dtype=float))


def diagonal_rotation_cocycle(t, sigma=2.0, betas=(0.0, math.pi / 2), spec=None):
    """diag(sigma, 1/sigma) R(t beta_i): illustrative family that leaves the bunched
    region as t grows (non-commuting directions)."""
    spec = spec or full_shift(len(betas))
    D = np.diag([sigma, 1.0 / sigma])
    mats = [D @ rotation(t * betas[i % len(betas)]) for i in range(spec.alphabet_size)]
    return WindowedCocycle(spec, (0, 1), np.array(mats))


def diagonal_constant(s, spec=None):
    spec = spec or full_shift(2)
    return WindowedCocycle.constant(spec, np.diag([s, 1.0 / s]))


def diagonal_windowed(a, spec):
    """diag(e^a(x0), e^-a(x0))."""
    a = np.asarray(a, dtype=float)
    mats = np.array([np.diag([math.exp(v), math.exp(-v)]) for v in a])
    return WindowedCocycle(spec, (0, 1), mats)


def rotation_constant(beta, spec=None):
    spec = spec or full_shift(2)
    return WindowedCocycle.constant(spec, rotation(beta))


def margulis_preset():
    """Constant diag(1/2, 2) over Bernoulli(1/2): q = [1:0] is expanding."""
    spec = full_shift(2)
    return diagonal_constant(0.5, spec), bernoulli(spec, [0.5, 0.5])


COCYCLE_FAMILIES = {
    "bunched": bunched_cocycle,
    "diagonal_rotation": diagonal_rotation_cocycle,
}

POTENTIAL_FAMILIES = {
    "bunched": bunched_potential,
}
