"""Simulation and fidelity analysis of DDRF-controlled NV nuclear-spin registers."""

__version__ = "0.1.0"
