"""Qutrit cross-Kerr entangling gates: device physics, calibration, benchmarking and synthesis."""
__version__ = "0.1.0"
