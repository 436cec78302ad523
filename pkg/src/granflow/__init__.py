"""Planar granular gas dynamics: exact solutions, a finite-volume solver and
integral diagnostics for the Euler equations with inelastic cooling."""

__version__ = "0.1.0"
