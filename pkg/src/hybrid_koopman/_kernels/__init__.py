"""Grid kernels with a compiled backend and a numpy fallback.

The compiled extension ``_core`` is used when it was built; otherwise the
numpy implementations in ``_fallback`` are used. Setting the environment
variable ``HYBRID_KOOPMAN_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _fallback as python_backend

try:
    from . import _core as compiled_backend
except ImportError:  # extension not built
    compiled_backend = None

if compiled_backend is not None and os.environ.get("HYBRID_KOOPMAN_PURE_PYTHON") != "1":
    BACKEND = "compiled"
    _active = compiled_backend
else:
    BACKEND = "python"
    _active = python_backend

liouvillian_apply = _active.liouvillian_apply
bilinear_sample = _active.bilinear_sample

__all__ = [
    "BACKEND",
    "bilinear_sample",
    "compiled_backend",
    "liouvillian_apply",
    "python_backend",
]
