"""Kinetic-inductance traveling-wave parametric amplifier toolkit."""

__version__ = "0.1.0"
