"""Latent-space ensemble inversion of groundwater conductivity fields."""

__version__ = "0.1.0"

from ._kernels import backend as kernel_backend  # noqa: F401
