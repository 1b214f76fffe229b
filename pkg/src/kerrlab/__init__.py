"""kerrlab: numerics for the parametrically squeezed Kerr oscillator."""
__version__ = "0.1.0"

from . import errors  # noqa: F401
