"""Truncated Fourier-lattice Picard solver for generalized Navier-Stokes systems."""

__version__ = "0.1.0"
