"""Numerical toolkit for reduced energies of axisymmetric harmonic maps into hyperbolic targets."""

__version__ = "0.1.0"
