"""Simulation and learning toolkit for targeted blanket uncovering."""

__version__ = "0.1.0"
