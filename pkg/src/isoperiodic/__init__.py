"""Isoperiodic deformations on the Legendre family of elliptic curves."""
