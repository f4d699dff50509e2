"""Plane-stress chemo-elastoplasticity with bound-preserving anisotropic diffusion."""

__version__ = "0.1.0"
