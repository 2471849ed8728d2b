"""Droplet-regime analysis of a 2D ternary nonlocal isoperimetric system on the unit torus."""

__version__ = "0.1.0"
