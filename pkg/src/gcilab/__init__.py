"""Numerical laboratory for Gaussian correlation experiments on convex sets."""

__version__ = "0.1.0"

from . import blconst, convex, errors, flow, gaussmc, gcicheck, symmat  # noqa: F401

__all__ = [
    "__version__",
    "blconst",
    "convex",
    "errors",
    "flow",
    "gaussmc",
    "gcicheck",
    "symmat",
]
