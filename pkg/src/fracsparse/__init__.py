"""Numerical laboratory for fractional integrals, commutators and sparse domination."""
