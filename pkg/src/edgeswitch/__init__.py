"""Software emulation of a P4 edge switch for tactile teleoperation."""
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
