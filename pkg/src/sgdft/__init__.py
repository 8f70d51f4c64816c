"""Kohn-Sham DFT on molecular grids: direct stochastic-gradient orbital
optimization with a whitening+QR orthonormality reparameterization, an SCF
baseline, and an optional neural local-scaling basis transform."""

__version__ = "0.1.0"
