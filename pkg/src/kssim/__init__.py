"""Finite-difference simulator for a parabolic-elliptic Keller-Segel system
with signal-dependent motility and slightly superlinear degradation."""

__version__ = "0.1.0"
