"""Hot kernels: compiled extension when available, numpy fallback otherwise.

Set ``SOLARCAST_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels as python

compiled = None
if os.environ.get("SOLARCAST_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled
    except ImportError:
        compiled = None

_impl = compiled if compiled is not None else python
BACKEND = "cython" if compiled is not None else "python"

best_split_sorted = _impl.best_split_sorted
knn_predict = _impl.knn_predict

__all__ = ["BACKEND", "best_split_sorted", "knn_predict", "compiled", "python"]
