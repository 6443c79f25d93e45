"""Branch-and-bound kernels for the exact offline solver.

The compiled extension is used when it imports; otherwise the pure-Python
implementation takes over.  Set ``SCHEDLAB_PURE_PYTHON=1`` to force the
fallback.
"""

import os

from . import bnb_py

try:
    if os.environ.get("SCHEDLAB_PURE_PYTHON"):
        raise ImportError("pure-Python kernels requested")
    from . import _bnb as _ext
except ImportError:
    _ext = None

BACKEND = "cython" if _ext is not None else "python"
solve = _ext.solve if _ext is not None else bnb_py.solve

__all__ = ["BACKEND", "solve", "bnb_py"]
