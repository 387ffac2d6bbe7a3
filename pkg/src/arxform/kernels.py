"""Kernel backend selection.

The compiled extension is used when it was built; otherwise the numpy
fallback is used. Set ``ARXFORM_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

BACKENDS = {"python": _kernels_py}

try:
    from . import _kernels as _kernels_c
except ImportError:  # extension not built
    _kernels_c = None
else:
    BACKENDS["cython"] = _kernels_c

if _kernels_c is not None and os.environ.get("ARXFORM_PURE_PYTHON", "") in ("", "0"):
    BACKEND = "cython"
    _impl = _kernels_c
else:
    BACKEND = "python"
    _impl = _kernels_py

power_norms = _impl.power_norms
solve_split = _impl.solve_split
affine_compose = _impl.affine_compose
fir_sum = _impl.fir_sum

__all__ = ["BACKEND", "BACKENDS", "power_norms", "solve_split", "affine_compose", "fir_sum"]
