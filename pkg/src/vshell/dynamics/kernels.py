"""Kernel backend selection.

The compiled extension is used when it imports; ``VSHELL_KERNELS=python``
forces the NumPy fallback.
"""

import logging
import os

log = logging.getLogger(__name__)

_choice = os.environ.get("VSHELL_KERNELS", "auto").lower()
if _choice not in ("auto", "python", "compiled"):
    raise ImportError(f"VSHELL_KERNELS must be auto, python or compiled, got {_choice!r}")

backend = None
if _choice != "python":
    try:
        from . import _kernels as backend  # type: ignore[no-redef]
    except ImportError:
        if _choice == "compiled":
            raise
        log.debug("compiled kernels unavailable, using NumPy fallback")
if backend is None:
    from . import _kernels_py as backend  # type: ignore[no-redef]

BACKEND_NAME = "compiled" if backend.__name__.endswith("._kernels") else "python"

sort_order = backend.sort_order
enclosed_mass = backend.enclosed_mass
kick = backend.kick
drift = backend.drift
set_threads = backend.set_threads
get_threads = backend.get_threads
