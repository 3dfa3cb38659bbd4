"""Numerical lab for linear cocycles over subshifts of finite type: Lyapunov exponents,
equilibrium states, holonomies, invariant projective families and coupling energies."""

__version__ = "0.1.0"
