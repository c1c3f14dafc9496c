"""Kernel backend selection.

The compiled ``_speedups`` extension is used when it imports; otherwise the
pure-Python ``_pykernels`` module is used. Set ``EDGESWITCH_PURE_PYTHON=1`` to
force the fallback.
"""
import os

from . import _pykernels

if os.environ.get("EDGESWITCH_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _speedups as _impl
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"
    else:
        BACKEND = "cython"

abs16 = _impl.abs16
l1_step = _impl.l1_step
deadband_step = _impl.deadband_step
deadband_run = _impl.deadband_run
edge_sensors = _impl.edge_sensors


def available_backends():
    """Map of backend name to kernel module for every backend that imports."""
    backends = {"python": _pykernels}
    try:
        from . import _speedups
    except ImportError:
        pass
    else:
        backends["cython"] = _speedups
    return backends
