"""Diffusion-maps embedding with a Mahalanobis kernel, linear latent
dynamics, and a contracting observer for sequential state estimation."""

__version__ = "0.1.0"
