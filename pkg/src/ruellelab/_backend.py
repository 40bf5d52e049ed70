"""Select the stencil kernels at import time.

The compiled extension is used when it imports cleanly; otherwise, or when
``RUELLELAB_PURE`` is set to a non-empty value other than ``0``, the numpy
fallback is used.  ``BACKEND`` records which one is active.
"""

import os

from . import _fallback

_force_pure = os.environ.get("RUELLELAB_PURE", "") not in ("", "0")

kernels = _fallback
BACKEND = "numpy"
if not _force_pure:
    try:
        from . import _kernels as kernels  # noqa: F811
        BACKEND = "cython"
    except ImportError:  # extension not built
        kernels = _fallback
        BACKEND = "numpy"


def get_kernels(name=None):
    """Return a kernel module by name (``"cython"`` or ``"numpy"``)."""
    if name is None:
        return kernels
    if name == "numpy":
        return _fallback
    if name == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {name!r}")
