"""Hot-loop kernels with a compiled core and a numpy fallback.

The Cython extension ``_ckernels`` is tried first; if it is missing (not
built, wrong platform) or ``KGEAFFINE_PURE_PYTHON=1`` is set, the numpy
implementations in ``_pykernels`` are used instead. Both backends are
semantically identical; ``benchmarks/bench_kernels.py`` compares them.
"""

import os

from . import _pykernels

if os.environ.get("KGEAFFINE_PURE_PYTHON"):
    _backend = _pykernels
else:
    try:
        from . import _ckernels as _backend
    except ImportError:
        _backend = _pykernels

BACKEND = "cython" if _backend is not _pykernels else "python"

scatter_add_rows = _backend.scatter_add_rows
sgd_update = _backend.sgd_update
adagrad_update = _backend.adagrad_update
rank_counts = _backend.rank_counts

__all__ = [
    "BACKEND",
    "scatter_add_rows",
    "sgd_update",
    "adagrad_update",
    "rank_counts",
]
