"""Non-interactive source simulation: Fourier-domain solvers, protocols and oracles."""

__version__ = "0.1.0"
