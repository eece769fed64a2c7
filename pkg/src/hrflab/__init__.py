"""Simulation and verification laboratory for coupled geometric flows on
symmetry-reduced closed manifolds: metric evolution coupled to a harmonic
map, conjugate-heat solutions, entropy and eigenvalue monotonicity, and
explicit Sobolev, sup-norm, and heat-kernel bounds checked numerically."""

__version__ = "0.1.0"
