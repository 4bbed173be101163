"""Simulation and learning toolkit for delta-robot pick-and-throw."""

__version__ = "0.1.0"
