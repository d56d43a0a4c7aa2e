"""Certified L2-gain bounds and passivity certificates for coupled 1-D linear PDEs."""

__version__ = "0.1.0"
