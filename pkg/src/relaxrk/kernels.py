"""Backend selection for the WENO5 hot loop.

The compiled extension ``relaxrk._kernels`` is used when it was built and
imports cleanly; otherwise the numpy implementation in ``_kernels_py``.
Set ``RELAXRK_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

_compiled = None
if os.environ.get("RELAXRK_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None

_active = _compiled if _compiled is not None else _kernels_py

BACKEND = _active.BACKEND
WENO_EPS = _kernels_py.WENO_EPS

weno5_faces = _active.weno5_faces
weno5_divergence = _active.weno5_divergence


def available_backends():
    """Mapping of backend name to kernel module, compiled first if present."""
    out = {}
    if _compiled is not None:
        out[_compiled.BACKEND] = _compiled
    out[_kernels_py.BACKEND] = _kernels_py
    return out
