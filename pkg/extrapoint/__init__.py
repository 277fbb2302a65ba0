"""ExtraPoint - stochastic extra-point and extra-momentum solvers for strongly monotone VIs."""

__version__ = "1.0.0"
