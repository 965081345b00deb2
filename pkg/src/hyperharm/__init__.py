"""Harmonic maps at bounded distance from hull retractions, in H^2 and H^3."""

__version__ = "0.1.0"
