"""Hot-kernel backend selection: compiled extension if present, numpy otherwise."""

try:
    from ._fast import BACKEND, convolve_direct, jacobi_eigh
except ImportError:  # extension not built
    from ._ref import BACKEND, convolve_direct, jacobi_eigh

__all__ = ["BACKEND", "jacobi_eigh", "convolve_direct"]
