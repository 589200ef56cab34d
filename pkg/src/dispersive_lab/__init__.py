"""Numerical laboratory for fractional dispersive equations and the
linearized water wave system: Fourier-multiplier propagators, oscillatory
kernels, extremal data and decay-rate experiments."""

__version__ = "0.1.0"
