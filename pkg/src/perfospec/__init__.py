"""Laplacian eigenvalues of domains with a small Neumann hole, and the leading-order shift they follow."""

__version__ = "0.1.0"

from .errors import PerfospecError  # noqa: E402

__all__ = ["PerfospecError", "__version__"]
