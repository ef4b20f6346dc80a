"""Grid kernels: compiled extension when available, pure Python otherwise.

Set ``BIMROBO_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels as python

if os.environ.get("BIMROBO_PURE_PYTHON"):
    compiled = None
else:
    try:
        from . import _ext as compiled
    except ImportError:  # extension not built
        compiled = None

_impl = compiled if compiled is not None else python
BACKEND = "cython" if compiled is not None else "python"

astar = _impl.astar
fill_convex = _impl.fill_convex

__all__ = ["astar", "fill_convex", "BACKEND", "python", "compiled"]
