"""Higher-order diffusion waves of the 1D viscous p-system: solvers and verification tools."""

__version__ = "0.1.0"
