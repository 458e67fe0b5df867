"""Pairwise distance kernels: compiled extension when available, numpy otherwise.

Set ``HYPUML_PURE_PYTHON=1`` to force the numpy fallback.
"""

import os

from . import _pairwise_py

BACKEND = "python"

if os.environ.get("HYPUML_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _pairwise as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _pairwise_py
else:
    _impl = _pairwise_py

pairwise_distance = _impl.pairwise_distance
pairwise_distance_backward = _impl.pairwise_distance_backward

__all__ = ["BACKEND", "pairwise_distance", "pairwise_distance_backward", "_pairwise_py"]
