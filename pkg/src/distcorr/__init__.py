"""Uplink spectral efficiency under correlated receiver hardware distortion."""

__version__ = "0.1.0"
