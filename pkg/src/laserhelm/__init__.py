"""Frequency-domain laser propagation in a plasma: separable-preconditioned GMRES Helmholtz solver."""

__version__ = "0.1.0"
