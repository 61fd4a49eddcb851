"""Hamiltonian stationary Lagrangian self-similar surfaces in C^2."""

__version__ = "0.1.0"
